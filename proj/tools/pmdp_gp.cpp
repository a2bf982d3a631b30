// placeholder main, replaced once the task layer lands
int main() { return 2; }
