#include <string.h>
#include "alloc.h"
char *glue_strings(const char *list[])
{
    size_t len = 0;
    char *p, *ret;
    int i;

    for (i = 0; list[i] != NULL; i++)
        len += strlen(list[i]);

    if (!(ret = p = OPENSSL_malloc(len + 1)))
        return NULL;

    for (i = 0; list[i] != NULL; i++)
        p += strlen(strcpy(p, list[i]));

    return ret;
}

/* Number of entries before the terminating NULL. */
size_t count_strings(const char *list[])
{
    size_t n = 0;

    while (list[n] != NULL)
        n++;
    return n;
}

void release_glued(char *s)
{
    CRYPTO_free(s);
}
