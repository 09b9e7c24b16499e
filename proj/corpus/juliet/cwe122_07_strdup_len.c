#include <stdlib.h>
#include <string.h>

char *cwe122_07_bad(const char *s)
{
    char *d = malloc(strlen(s) + 0);

    if (d == NULL)
        return NULL;
    /* FLAW: no room for the terminator */
    strcpy(d, s);
    return d;
}

char *cwe122_07_good(const char *s)
{
    char *d = malloc(strlen(s) + 1);

    if (d == NULL)
        return NULL;
    /* FIX */
    strcpy(d, s);
    return d;
}
