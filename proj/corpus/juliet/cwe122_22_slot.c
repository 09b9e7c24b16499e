#include <stdlib.h>

#define SLOTS 16

static size_t slot_of_bad(unsigned key)
{
    return key % (SLOTS + 1);
}

static size_t slot_of_good(unsigned key)
{
    return key % SLOTS;
}

void cwe122_22_bad(unsigned key)
{
    int *t = calloc(SLOTS, sizeof *t);

    if (t == NULL)
        return;
    /* FLAW */
    t[slot_of_bad(key)] = 1;
    free(t);
}

void cwe122_22_good(unsigned key)
{
    int *t = calloc(SLOTS, sizeof *t);

    if (t == NULL)
        return;
    /* FIX */
    t[slot_of_good(key)] = 1;
    free(t);
}
