/* Byte cursor and allocation tracker pasted into every generated harness.
 * Plain C, no headers: the harness prelude already carries the slice's
 * declarations and must not collide with ours. */

typedef __SIZE_TYPE__ sf_size;
typedef unsigned long long sf_u64;

typedef struct {
    const unsigned char *base;
    sf_size len;
    sf_size off; /* invariant: off <= len */
} sf_cursor;

static void sf_cursor_init(sf_cursor *c, const unsigned char *base, sf_size len)
{
    c->base = base;
    c->len = len;
    c->off = 0;
}

static sf_size sf_remaining(const sf_cursor *c)
{
    return c->len - c->off;
}

/* Copies exactly n bytes or, on exhaustion, leaves the cursor unchanged. */
static int sf_take_bytes(sf_cursor *c, void *dst, sf_size n)
{
    if (sf_remaining(c) < n)
        return 0;
    if (n)
        __builtin_memcpy(dst, c->base + c->off, n);
    c->off += n;
    return 1;
}

static int sf_skip(sf_cursor *c, sf_size n)
{
    if (sf_remaining(c) < n)
        return 0;
    c->off += n;
    return 1;
}

/* Little-endian unsigned of 1..8 bytes. */
static int sf_take_scalar(sf_cursor *c, sf_size width, sf_u64 *out)
{
    unsigned char b[8];
    sf_u64 v = 0;
    sf_size i;

    if (width == 0 || width > 8 || !sf_take_bytes(c, b, width))
        return 0;
    for (i = width; i > 0; i--)
        v = (v << 8) | b[i - 1];
    *out = v;
    return 1;
}

#ifndef SF_MAX_ALLOCS
#define SF_MAX_ALLOCS 1
#endif

static void *sf_allocs[SF_MAX_ALLOCS];
static sf_size sf_nallocs;

static void *sf_alloc(sf_size n)
{
    void *p;

    if (sf_nallocs == SF_MAX_ALLOCS)
        __builtin_trap();
    p = __builtin_calloc(1, n ? n : 1);
    if (!p)
        __builtin_trap();
    sf_allocs[sf_nallocs++] = p;
    return p;
}

static void sf_release(void)
{
    while (sf_nallocs)
        __builtin_free(sf_allocs[--sf_nallocs]);
}

/* n bytes plus a terminator, in a block of exactly n + 1. */
static char *sf_take_cstring(sf_cursor *c, sf_size n)
{
    char *s;

    if (sf_remaining(c) < n)
        return 0;
    s = (char *)sf_alloc(n + 1);
    sf_take_bytes(c, s, n);
    s[n] = '\0';
    return s;
}

/* count strings of region/count bytes each, then a NULL slot; the
 * division remainder is skipped so the region is consumed exactly. */
static char **sf_take_string_array(sf_cursor *c, sf_size count, sf_size region)
{
    char **arr;
    sf_size chunk, i;

    if (count == 0 || sf_remaining(c) < region)
        return 0;
    arr = (char **)sf_alloc((count + 1) * sizeof *arr);
    chunk = region / count;
    for (i = 0; i < count; i++)
        arr[i] = sf_take_cstring(c, chunk);
    arr[count] = 0;
    sf_skip(c, region - chunk * count);
    return arr;
}

/* Length of a variable slot that is not the last one. */
static sf_size sf_slot_len(const sf_cursor *c, sf_u64 header)
{
    return (sf_size)(header % ((sf_u64)sf_remaining(c) + 1));
}

#ifdef SLICEFUZZ_TRACE
static void sf_trace_bytes(const char *what, const void *p, sf_size n, sf_size off)
{
    const unsigned char *b = (const unsigned char *)p;
    sf_size i;

    __builtin_printf("SFTRACE %s @%zu+%zu", what, (sf_size)off, n);
    for (i = 0; i < n; i++)
        __builtin_printf("%s%02x", i ? "" : " ", b[i]);
    __builtin_printf("\n");
}
#define SF_TRACE(what, p, n, off) sf_trace_bytes(what, p, n, off)
#define SF_TRACE_END(c) __builtin_printf("SFTRACE consumed %zu of %zu\n", (c)->off, (c)->len)
#else
#define SF_TRACE(what, p, n, off) ((void)0)
#define SF_TRACE_END(c) ((void)0)
#endif
