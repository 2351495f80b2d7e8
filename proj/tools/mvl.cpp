#include <cstdio>

int main() {
  std::puts("mvl: not wired up yet");
  return 3;
}
