// Placeholder CLI entry point; replaced by the experiment runner once the
// training pipeline lands.
#include <cstdio>

int main() {
    std::puts("pinntherm: experiment runner not wired up yet");
    return 1;
}
