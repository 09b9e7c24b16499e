#include <string.h>

void cwe121_01_bad(const char *data, int n)
{
    char buf[16];

    if (n < 0)
        return;
    /* FLAW: n is never compared with the destination size */
    memcpy(buf, data, (size_t)n);
    buf[sizeof buf - 1] = '\0';
}

void cwe121_01_good(const char *data)
{
    char buf[16];
    size_t n = strlen(data);

    if (n > sizeof buf)
        n = sizeof buf;
    /* FIX */
    memcpy(buf, data, n);
    buf[sizeof buf - 1] = '\0';
}
