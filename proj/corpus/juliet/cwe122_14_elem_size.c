#include <stdlib.h>

void cwe122_14_bad(int n)
{
    int *v;
    int i;

    if (n <= 0 || n > 64)
        return;
    v = malloc((size_t)n);
    if (v == NULL)
        return;
    for (i = 0; i < n; i++)
        /* FLAW: allocation counted bytes, not elements */
        v[i] = i;
    free(v);
}

void cwe122_14_good(int n)
{
    int *v;
    int i;

    if (n <= 0 || n > 64)
        return;
    v = malloc((size_t)n * sizeof *v);
    if (v == NULL)
        return;
    for (i = 0; i < n; i++)
        /* FIX */
        v[i] = i;
    free(v);
}
