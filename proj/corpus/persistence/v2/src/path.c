#include <stddef.h>
#include <string.h>

/* dir and base are truncated so the result always fits. */
size_t join_path(const char *dir, const char *base)
{
    char out[64];
    size_t a = strlen(dir) % 32;
    size_t b = strlen(base) % 31;

    memcpy(out, dir, a);
    out[a] = '/';
    memcpy(out + a + 1, base, b);
    out[a + b + 1] = '\0';
    return strlen(out);
}
