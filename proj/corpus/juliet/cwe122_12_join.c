#include <stdlib.h>
#include <string.h>

char *cwe122_12_bad(const char *list[])
{
    size_t len = 0;
    char *p, *ret;
    int i;

    for (i = 0; list[i] != NULL; i++)
        len += strlen(list[i]);
    if (!(ret = p = malloc(len ? len : 1)))
        return NULL;
    for (i = 0; list[i] != NULL; i++)
        /* FLAW: the final terminator lands one past the block */
        p += strlen(strcpy(p, list[i]));
    return ret;
}

char *cwe122_12_good(const char *list[])
{
    size_t len = 0;
    char *p, *ret;
    int i;

    for (i = 0; list[i] != NULL; i++)
        len += strlen(list[i]);
    if (!(ret = p = malloc(len + 1)))
        return NULL;
    *p = '\0';
    for (i = 0; list[i] != NULL; i++)
        /* FIX */
        p += strlen(strcpy(p, list[i]));
    return ret;
}
