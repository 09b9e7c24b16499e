#include <string.h>

void cwe121_17_bad(const char *s, long n)
{
    char buf[32];

    if (n > 32)
        n = 32;
    /* FLAW: negative n becomes a huge size */
    memcpy(buf, s, (size_t)n);
}

void cwe121_17_good(const char *s, long n)
{
    char buf[32];
    size_t avail = strnlen(s, sizeof buf);

    if (n < 0 || (size_t)n > avail)
        n = (long)avail;
    /* FIX */
    memcpy(buf, s, (size_t)n);
}
