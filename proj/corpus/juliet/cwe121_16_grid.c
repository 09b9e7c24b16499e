void cwe121_16_bad(int row, int col)
{
    char grid[16] = {0};

    if (row >= 0 && row < 4 && col >= 0 && col < 8)
        /* FLAW: col bound uses the wrong dimension */
        grid[row * 4 + col] = 1;
}

void cwe121_16_good(int row, int col)
{
    char grid[16] = {0};

    if (row >= 0 && row < 4 && col >= 0 && col < 4)
        /* FIX */
        grid[row * 4 + col] = 1;
}
