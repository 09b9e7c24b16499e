void cwe121_18_bad(double ratio)
{
    char bar[10] = {0};
    int k;

    if (!(ratio >= 0.0 && ratio < 100.0))
        return;
    k = (int)(ratio * 10.0);
    /* FLAW */
    bar[k] = '#';
}

void cwe121_18_good(double ratio)
{
    char bar[10] = {0};
    int k;

    if (!(ratio >= 0.0 && ratio < 1.0))
        return;
    k = (int)(ratio * 10.0);
    /* FIX */
    bar[k] = '#';
}
