#pragma once

#include <cstdint>

#include "gazeclip/tensor.hpp"

// Process-wide counters used to assert which parts of the graph executed.
namespace gazeclip::instrumentation {

void reset();

/// Query×key score entries computed by gaze injectors, summed over heads.
void add_gi_attention_work(std::uint64_t scores);
std::uint64_t gi_attention_work();

void note_lre_built();
std::uint64_t lre_builds();
void note_lre_forward();
std::uint64_t lre_forward_calls();

/// When enabled, every attention probability matrix is checked for
/// row-stochasticity and the worst |Σrow − 1| is retained.
void set_row_check(bool enabled);
void record_attention_rows(const ag::Tensor& probs);
double max_attention_row_deviation();
std::uint64_t attention_rows_checked();

}  // namespace gazeclip::instrumentation
