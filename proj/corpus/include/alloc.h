#ifndef CORPUS_ALLOC_H
#define CORPUS_ALLOC_H

#include <stddef.h>

void *CRYPTO_malloc(size_t num, const char *file, int line);
void *OPENSSL_malloc(size_t num);
void CRYPTO_free(void *ptr);

#endif
