void cwe121_13_bad(unsigned char count)
{
    char hist[128];
    unsigned i;

    for (i = 0; i < count; i++)
        /* FLAW: count reaches 255 */
        hist[i] = (char)i;
}

void cwe121_13_good(unsigned char count)
{
    char hist[128];
    unsigned i, n = count > sizeof hist ? sizeof hist : count;

    for (i = 0; i < n; i++)
        /* FIX */
        hist[i] = (char)i;
}
