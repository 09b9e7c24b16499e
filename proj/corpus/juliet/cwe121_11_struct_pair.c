struct pair {
    int a;
    char b;
};

void cwe121_11_bad(struct pair *p)
{
    char buf[16] = {0};

    if (p->a < 16)
        /* FLAW */
        buf[p->a] = p->b;
}

void cwe121_11_good(struct pair *p)
{
    char buf[16] = {0};

    if (p->a >= 0 && p->a < 16)
        /* FIX */
        buf[p->a] = p->b;
}
