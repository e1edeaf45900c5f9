#include "hiercast/autodiff.hpp"

namespace hiercast {

void Tape::backward(int root) {
  if (root < 0 || static_cast<std::size_t>(root) >= records_.size())
    throw AutodiffError("backward root is not on the tape");
  adjoints_.assign(values_.size(), 0.0);
  adjoints_[static_cast<std::size_t>(root)] = 1.0;
  for (int i = root; i >= 0; --i) {
    const double a = adjoints_[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    const Record& r = records_[static_cast<std::size_t>(i)];
    if (r.p1 >= 0) adjoints_[static_cast<std::size_t>(r.p1)] += r.w1 * a;
    if (r.p2 >= 0) adjoints_[static_cast<std::size_t>(r.p2)] += r.w2 * a;
  }
}

}  // namespace hiercast
