#include <stdlib.h>
#include <string.h>

void cwe122_06_bad(int n)
{
    char *p = malloc(10);

    if (p == NULL || n < 0)
        goto done;
    /* FLAW */
    memset(p, 'A', (size_t)n);
done:
    free(p);
}

void cwe122_06_good(int n)
{
    char *p = malloc(10);

    if (p == NULL || n < 0)
        goto done;
    if (n > 10)
        n = 10;
    /* FIX */
    memset(p, 'A', (size_t)n);
done:
    free(p);
}
