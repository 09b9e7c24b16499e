#include <stdbool.h>
#include <string.h>

void cwe121_21_bad(bool raw, const char *s)
{
    char buf[12];

    if (raw)
        /* FLAW */
        strcpy(buf, s);
    else
        strncpy(buf, s, sizeof buf);
}

void cwe121_21_good(bool raw, const char *s)
{
    char buf[12];

    (void)raw;
    /* FIX */
    strncpy(buf, s, sizeof buf);
}
