#ifndef CORPUS_FIXTURES_H
#define CORPUS_FIXTURES_H

#include <stddef.h>

char *glue_strings(const char *list[]);
size_t count_strings(const char *list[]);
void release_glued(char *s);
void stash_record(const char *rec);
unsigned frame_checksum(const char *s);
size_t before_region(const char *s);
unsigned after_region(unsigned x);

#endif
