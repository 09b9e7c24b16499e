#include <string.h>

/* Implemented in asm_helper.S */
unsigned asm_checksum(const unsigned char *p, size_t n);

unsigned frame_checksum(const char *s)
{
    unsigned char buf[16];
    size_t n = strlen(s);

    if (n > sizeof buf)
        n = sizeof buf;
    memcpy(buf, s, n);
    return asm_checksum(buf, n);
}
