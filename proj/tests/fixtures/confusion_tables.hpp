#pragma once

// Hand-enumerated confusion tables shared by the metric tests and the
// acceptance gate. Every rate is a terminating decimal, so the division must
// hit the literal exactly.

#include <cstddef>

namespace fixtures {

struct ConfusionTable {
    std::size_t tp, fn, tn, fp;
    double sens, spec, ba;
};

inline constexpr ConfusionTable kConfusionTables[] = {
    {0, 8, 8, 0, 0, 1, 0.5},
    {8, 0, 0, 8, 1, 0, 0.5},
    {16, 0, 16, 0, 1, 1, 1},
    {0, 16, 0, 16, 0, 0, 0},
    {1, 1, 1, 1, 0.5, 0.5, 0.5},
    {3, 1, 7, 1, 0.75, 0.875, 0.8125},
    {4, 12, 757, 267, 0.25, 0.7392578125, 0.49462890625},
    {134, 890, 6, 250, 0.130859375, 0.0234375, 0.0771484375},
    {119, 137, 12, 20, 0.46484375, 0.375, 0.419921875},
    {243, 13, 406, 106, 0.94921875, 0.79296875, 0.87109375},
    {949, 1099, 2, 6, 0.46337890625, 0.25, 0.356689453125},
    {15, 497, 16, 112, 0.029296875, 0.125, 0.0771484375},
    {0, 8, 616, 408, 0, 0.6015625, 0.30078125},
    {1, 1, 24, 8, 0.5, 0.75, 0.625},
    {113, 15, 34, 94, 0.8828125, 0.265625, 0.57421875},
    {4, 60, 1, 3, 0.0625, 0.25, 0.15625},
    {132, 124, 13, 3, 0.515625, 0.8125, 0.6640625},
    {1725, 323, 32, 0, 0.84228515625, 1, 0.921142578125},
    {89, 39, 834, 190, 0.6953125, 0.814453125, 0.7548828125},
    {689, 335, 0, 16, 0.6728515625, 0, 0.33642578125},
};

} // namespace fixtures
