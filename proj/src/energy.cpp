#include "greendrl/energy.hpp"

#include <algorithm>
#include <cmath>

#include "greendrl/error.hpp"

namespace greendrl::energy {

std::uint64_t macs_forward(const DenseNet& net) {
  std::uint64_t n = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weights(l);
    n += static_cast<std::uint64_t>(std::count_if(w.begin(), w.end(), [](double v) { return v != 0.0; }));
  }
  return n;
}

Event inference(const DenseNet& net) { return InferenceEvent{macs_forward(net)}; }

Event train_step(const DenseNet& net, std::uint64_t batch_size) {
  const auto macs = macs_forward(net);
  return TrainStepEvent{macs, macs, batch_size};
}

Event message(std::uint64_t bytes, Direction direction) { return MessageEvent{bytes, direction}; }

double Ledger::energy_proxy() const noexcept {
  return coefficients.per_mac * static_cast<double>(total_macs()) +
         coefficients.per_mem_access * static_cast<double>(mem_accesses) +
         coefficients.per_byte * static_cast<double>(bytes_wire);
}

Ledger record_event(Ledger ledger, const Event& event) {
  std::visit(
      [&ledger](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, InferenceEvent>) {
          ledger.macs_inference += e.macs;
        } else if constexpr (std::is_same_v<T, TrainStepEvent>) {
          ledger.macs_training += kTrainMacMultiplier * e.macs_forward * e.batch_size;
          ledger.mem_accesses += e.nonzero_weights * e.batch_size;
        } else {
          ledger.bytes_wire += e.bytes;
          (e.direction == Direction::Down ? ledger.bytes_down : ledger.bytes_up) += e.bytes;
        }
      },
      event);
  return ledger;
}

Ledger replay(std::span<const Event> events, Coefficients coefficients) {
  Ledger l;
  l.coefficients = coefficients;
  for (const auto& e : events) l = record_event(l, e);
  return l;
}

std::vector<CounterComparison> compare(const Ledger& a, const Ledger& b) {
  if (!(a.coefficients == b.coefficients)) throw InvalidInput("ledgers use different energy coefficients");
  auto row = [](std::string name, double x, double y) {
    CounterComparison c{std::move(name), x, y, 1.0, y - x};
    if (x != 0.0)
      c.ratio = y / x;
    else if (y != 0.0)
      c.ratio = INFINITY;
    return c;
  };
  auto d = [](std::uint64_t v) { return static_cast<double>(v); };
  return {
      row("macs_inference", d(a.macs_inference), d(b.macs_inference)),
      row("macs_training", d(a.macs_training), d(b.macs_training)),
      row("macs_total", d(a.total_macs()), d(b.total_macs())),
      row("mem_accesses", d(a.mem_accesses), d(b.mem_accesses)),
      row("bytes_wire", d(a.bytes_wire), d(b.bytes_wire)),
      row("bytes_down", d(a.bytes_down), d(b.bytes_down)),
      row("bytes_up", d(a.bytes_up), d(b.bytes_up)),
      row("energy_proxy", a.energy_proxy(), b.energy_proxy()),
  };
}

void write_comparison_csv(std::ostream& os, std::span<const CounterComparison> rows) {
  os << "counter,a,b,ratio,delta\n";
  for (const auto& r : rows) os << r.counter << ',' << r.a << ',' << r.b << ',' << r.ratio << ',' << r.delta << '\n';
}

}  // namespace greendrl::energy
