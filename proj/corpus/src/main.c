#include <stdio.h>
#include "config.h"
#include "fixtures.h"

int main(int argc, char **argv)
{
    const char *parts[] = {"alpha", "-", "beta", NULL};
    char *joined;

    load_config(argc, argv);
    joined = glue_strings(parts);
    if (joined == NULL)
        return 1;
    printf("%s (%zu parts, sum %u)\n", joined, count_strings(parts), frame_checksum(joined));
    if (argc > 1)
        stash_record(argv[1]);
    printf("%zu %u\n", before_region(joined), after_region(7));
    release_glued(joined);
    return 0;
}
