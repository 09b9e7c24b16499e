#include <stdlib.h>
#include <string.h>

void cwe122_10_bad(unsigned off)
{
    char src[16] = "0123456789abcde";
    char *p = malloc(32);

    if (p == NULL)
        return;
    if (off <= 32)
        /* FLAW: off up to 32 leaves fewer than 16 bytes */
        memmove(p + off, src, sizeof src);
    free(p);
}

void cwe122_10_good(unsigned off)
{
    char src[16] = "0123456789abcde";
    char *p = malloc(32);

    if (p == NULL)
        return;
    if (off <= 32 - sizeof src)
        /* FIX */
        memmove(p + off, src, sizeof src);
    free(p);
}
