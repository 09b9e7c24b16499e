#include <string.h>

enum copy_mode { MODE_SHORT, MODE_LONG };

void cwe121_20_bad(enum copy_mode mode, const char *s)
{
    char buf[8];
    size_t lim = mode == MODE_SHORT ? sizeof buf : 64;

    /* FLAW: strncpy pads out to lim */
    strncpy(buf, s, lim);
}

void cwe121_20_good(enum copy_mode mode, const char *s)
{
    char buf[8];
    size_t lim = sizeof buf;

    (void)mode;
    /* FIX */
    strncpy(buf, s, lim);
}
