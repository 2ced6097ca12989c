// placeholder until the command set lands
int main() { return 0; }
