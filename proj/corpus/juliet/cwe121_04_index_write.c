static int sum(const int *a, int n)
{
    int s = 0;
    for (int i = 0; i < n; i++)
        s += a[i];
    return s;
}

int cwe121_04_bad(int idx, int value)
{
    int table[10] = {0};

    if (idx < 10)
        /* FLAW: negative indexes pass the check */
        table[idx] = value;
    return sum(table, 10);
}

int cwe121_04_good(int idx, int value)
{
    int table[10] = {0};

    if (idx >= 0 && idx < 10)
        /* FIX */
        table[idx] = value;
    return sum(table, 10);
}
