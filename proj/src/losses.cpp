#include "trajrec/losses.hpp"

#include <cstdio>

namespace trajrec {

std::string format_loss_line(int iteration, const LossTerms<double>& terms) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "iter=%d per=%.9g reg=%.9g con=%.9g total=%.9g", iteration,
                terms.perceptual, terms.regularization, terms.contact, terms.total());
  return buf;
}

}  // namespace trajrec
