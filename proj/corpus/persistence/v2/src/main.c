#include <stdio.h>
#include <stddef.h>

size_t copy_name(const char *s);
size_t copy_tag(const char *s);
void fill_pad(const char *s);
size_t join_path(const char *dir, const char *base);

int main(int argc, char **argv)
{
    const char *arg = argc > 1 ? argv[1] : "example";

    fill_pad(arg);
    printf("%zu %zu %zu\n", copy_name(arg), copy_tag(arg), join_path("/tmp", arg));
    return 0;
}
