#include "hypstruct/autodiff.hpp"

namespace hypstruct::ad {

namespace {
thread_local Tape* g_active = nullptr;
}

Tape* active_tape() noexcept { return g_active; }

TapeScope::TapeScope(Tape& tape) noexcept : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

std::vector<double> Tape::adjoints(std::int32_t output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output < 0) return adj;
  adj[static_cast<std::size_t>(output)] = 1.0;
  for (std::int32_t i = output; i >= 0; --i) {
    const double g = adj[static_cast<std::size_t>(i)];
    if (g == 0.0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.a >= 0) adj[static_cast<std::size_t>(n.a)] += n.da * g;
    if (n.b >= 0) adj[static_cast<std::size_t>(n.b)] += n.db * g;
  }
  return adj;
}

std::vector<double> gradient(const Var& output, std::span<const Var> inputs) {
  std::vector<double> grad(inputs.size(), 0.0);
  const Tape* tape = active_tape();
  if (tape == nullptr || output.is_constant()) return grad;
  const auto adj = tape->adjoints(output.index());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].is_constant()) grad[i] = adj[static_cast<std::size_t>(inputs[i].index())];
  }
  return grad;
}

}  // namespace hypstruct::ad
