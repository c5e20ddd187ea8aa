#include "trajrec/autodiff.hpp"

namespace trajrec::ad {

void Tape::backward(const DVar& output) {
  adjoint_.assign(nodes_.size(), 0.0);
  backward_ops_ = 0;
  if (output.is_const()) return;
  if (static_cast<std::size_t>(output.id) >= nodes_.size())
    throw std::logic_error("tape: backward() output is not on this tape");
  adjoint_[output.id] = 1.0;
  for (std::int32_t i = output.id; i >= 0; --i) {
    const double w = adjoint_[i];
    if (w == 0.0) continue;
    const Node& n = nodes_[i];
    if (n.a == kCustomMark) {
      backward_ops_ += custom_[n.b]->backward(w, adjoint_.data());
      continue;
    }
    if (n.a >= 0) {
      adjoint_[n.a] += w * n.da;
      ++backward_ops_;
    }
    if (n.b >= 0) {
      adjoint_[n.b] += w * n.db;
      ++backward_ops_;
    }
  }
}

}  // namespace trajrec::ad
