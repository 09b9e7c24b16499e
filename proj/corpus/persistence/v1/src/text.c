#include <string.h>

size_t copy_name(const char *s)
{
    char buf[32];
    size_t n = strlen(s);

    if (n >= sizeof buf)
        n = sizeof buf - 1;
    memcpy(buf, s, n);
    buf[n] = '\0';
    return strlen(buf);
}

size_t copy_tag(const char *s)
{
    char tag[8];

    strncpy(tag, s, sizeof tag - 1);
    tag[sizeof tag - 1] = '\0';
    return strlen(tag);
}

void fill_pad(const char *s)
{
    char pad[16];
    size_t n = strlen(s) % sizeof pad;

    memset(pad, ' ', sizeof pad);
    memcpy(pad, s, n);
}
