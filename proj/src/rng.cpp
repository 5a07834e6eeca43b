#include "hetmed/rng.hpp"

#include "hetmed/special.hpp"

namespace hetmed {

double RngStream::normal() { return norm_quantile(uniform()); }

}  // namespace hetmed
