static const int weights[8] = {3, 1, 4, 1, 5, 9, 2, 6};

int cwe121_09_bad(int i)
{
    int local[8];

    for (int k = 0; k < 8; k++)
        local[k] = weights[k];
    if (i < 8)
        /* FLAW */
        return local[i];
    return -1;
}

int cwe121_09_good(int i)
{
    int local[8];

    for (int k = 0; k < 8; k++)
        local[k] = weights[k];
    if ((unsigned)i < 8u)
        /* FIX */
        return local[i];
    return -1;
}
