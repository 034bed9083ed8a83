#include "gazeclip/instrumentation.hpp"

#include <atomic>
#include <cmath>
#include <mutex>

namespace gazeclip::instrumentation {

namespace {
std::atomic<std::uint64_t> g_gi_work{0};
std::atomic<std::uint64_t> g_lre_builds{0};
std::atomic<std::uint64_t> g_lre_forwards{0};
std::atomic<bool> g_row_check{false};
std::atomic<std::uint64_t> g_rows_checked{0};
std::mutex g_dev_mutex;
double g_max_dev = 0.0;
}  // namespace

void reset() {
    g_gi_work = 0;
    g_lre_builds = 0;
    g_lre_forwards = 0;
    g_rows_checked = 0;
    std::lock_guard lock(g_dev_mutex);
    g_max_dev = 0.0;
}

void add_gi_attention_work(std::uint64_t scores) { g_gi_work += scores; }
std::uint64_t gi_attention_work() { return g_gi_work.load(); }

void note_lre_built() { ++g_lre_builds; }
std::uint64_t lre_builds() { return g_lre_builds.load(); }
void note_lre_forward() { ++g_lre_forwards; }
std::uint64_t lre_forward_calls() { return g_lre_forwards.load(); }

void set_row_check(bool enabled) { g_row_check = enabled; }

void record_attention_rows(const ag::Tensor& probs) {
    if (!g_row_check.load(std::memory_order_relaxed)) return;
    const std::size_t c = probs.cols();
    const std::size_t r = probs.numel() / c;
    double worst = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += probs.at(i * c + j);
        worst = std::max(worst, std::abs(total - 1.0));
    }
    g_rows_checked += r;
    std::lock_guard lock(g_dev_mutex);
    g_max_dev = std::max(g_max_dev, worst);
}

double max_attention_row_deviation() {
    std::lock_guard lock(g_dev_mutex);
    return g_max_dev;
}

std::uint64_t attention_rows_checked() { return g_rows_checked.load(); }

}  // namespace gazeclip::instrumentation
