void cwe121_05_bad(int n, char fill)
{
    char buf[8];
    int i;

    if (n > 8)
        return;
    for (i = 0; i <= n; i++)
        /* FLAW: writes buf[8] when n == 8 */
        buf[i] = fill;
}

void cwe121_05_good(int n, char fill)
{
    char buf[8];
    int i;

    if (n > 8)
        return;
    for (i = 0; i < n; i++)
        /* FIX */
        buf[i] = fill;
}
