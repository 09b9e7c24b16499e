int scale(int x);

int main(void)
{
    return scale(1) == 3 ? 0 : 1;
}
