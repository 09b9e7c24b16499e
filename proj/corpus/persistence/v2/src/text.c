#include <string.h>

/* Text helpers. Every copy is bounded by the destination. */

static size_t clamp(size_t n, size_t cap)
{
    return n < cap ? n : cap;
}

size_t copy_name(const char *s)
{
    char buf[32];
    size_t n = clamp(strlen(s), sizeof buf - 1);

    memcpy(buf, s, n);
    buf[n] = '\0';
    return strlen(buf);
}

size_t copy_tag(const char *s)
{
    char tag[8];

    strncpy(tag, s, sizeof tag - 2);
    tag[sizeof tag - 2] = '\0';
    return strlen(tag);
}

void fill_pad(const char *s)
{
    char pad[16] = {0};
    size_t n = strlen(s) % sizeof pad;

    memcpy(pad, s, n);
}
