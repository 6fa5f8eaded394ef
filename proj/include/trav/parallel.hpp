#pragma once

#include <vector>

namespace trav {

// Row-parallel loop over an image. Bodies must not share mutable state
// across rows; each row is processed exactly once.
template <class Body>
void parallel_rows(int height, Body&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int v = 0; v < height; ++v) {
        body(v);
    }
}

// Reduction over rows with a fixed accumulation order: per-row partials are
// computed (possibly in parallel) and then summed in row order, so the result
// is bit-identical for any thread count and matches the serial reference.
template <class RowValue>
double sum_rows(int height, RowValue&& row_value) {
    std::vector<double> partial(static_cast<std::size_t>(height), 0.0);
    parallel_rows(height, [&](int v) { partial[static_cast<std::size_t>(v)] = row_value(v); });
    double total = 0.0;
    for (double p : partial) {
        total += p;
    }
    return total;
}

}  // namespace trav
