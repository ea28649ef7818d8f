#pragma once

#include <cstddef>
#include <vector>

#include "eve/grad_stats.hpp"

namespace eve {

// Named contiguous slice of the parameter vector. Weight matrices are stored
// row-major as rows x cols; bias vectors have cols == 1.
struct ParamBlock {
    BlockId block_id;
    std::size_t rows = 0;
    std::size_t cols = 1;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

using Params = std::vector<ParamBlock>;

}  // namespace eve
