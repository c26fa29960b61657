#include <cstdio>

int main() {
  std::puts("ade: cli not wired yet");
  return 1;
}
