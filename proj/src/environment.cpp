#include "dpbe/environment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dpbe/errors.hpp"
#include "vmath.hpp"

namespace dpbe {

static_assert(std::endian::native == std::endian::little,
              "binary dump format assumes a little-endian host");

namespace {

std::size_t cells_for(double span, double delta) {
    if (span <= 0) return 0;
    auto m = static_cast<std::size_t>(std::ceil(span / delta));
    if (m == 0) m = 1;
    // ceil() can overshoot by one through rounding of span / delta.
    if (m > 1 && static_cast<double>(m - 1) * delta >= span) --m;
    return m;
}

bool is_multiple(double span, double delta, std::size_t m) {
    return std::abs(static_cast<double>(m) * delta - span) <= 1e-12 * std::max(1.0, span);
}

void check_finite_nonneg(double v, const char* what) {
    if (!(v >= 0) || !std::isfinite(v)) throw DomainError(std::string("grid: ") + what + " must be a finite value >= 0");
}

}  // namespace

GridSpec GridSpec::make(double t_max, double delta, double t_neg) {
    check_finite_nonneg(t_max, "t_max");
    check_finite_nonneg(t_neg, "t_neg");
    if (!(delta > 0) || !std::isfinite(delta)) throw DomainError("grid: delta must be > 0");
    GridSpec g;
    g.t_max = t_max;
    g.delta = delta;
    g.m_count = cells_for(t_max, delta);
    g.t_neg = t_neg;
    g.m_neg = cells_for(t_neg, delta);
    return g;
}

GridSpec GridSpec::uniform(double t_max, double delta_target, double t_neg) {
    check_finite_nonneg(t_max, "t_max");
    check_finite_nonneg(t_neg, "t_neg");
    if (!(delta_target > 0) || !std::isfinite(delta_target)) throw DomainError("grid: delta must be > 0");
    GridSpec g;
    g.t_max = t_max;
    g.m_count = cells_for(t_max, delta_target);
    g.delta = g.m_count > 0 ? t_max / static_cast<double>(g.m_count) : delta_target;
    g.m_neg = cells_for(t_neg, g.delta);
    g.t_neg = static_cast<double>(g.m_neg) * g.delta;
    return g;
}

double GridSpec::time(std::size_t m) const {
    if (m >= m_count) return t_max;
    return static_cast<double>(m) * delta;
}

double GridSpec::window_time(std::size_t w) const {
    if (w >= m_neg) return time(w - m_neg);
    if (w == 0) return -t_neg;
    return -static_cast<double>(m_neg - w) * delta;
}

double GridSpec::width(std::size_t c) const { return time(c + 1) - time(c); }

std::vector<double> GridSpec::widths() const {
    std::vector<double> h(m_count);
    for (std::size_t c = 0; c < m_count; ++c) h[c] = width(c);
    return h;
}

std::vector<double> GridSpec::window_widths() const {
    const std::size_t cells = m_neg + m_count;
    std::vector<double> h(cells);
    for (std::size_t c = 0; c < cells; ++c) h[c] = window_time(c + 1) - window_time(c);
    return h;
}

std::size_t GridSpec::index_of(double t) const {
    const double tol = 1e-9 * delta;
    if (!(t >= -tol) || !(t <= t_max + tol)) throw IndexError("grid: time " + std::to_string(t) + " outside [0, t_max]");
    if (std::abs(t - t_max) <= tol) return m_count;
    const auto m = static_cast<std::size_t>(std::llround(t / delta));
    if (m > m_count || std::abs(time(m) - t) > tol)
        throw IndexError("grid: time " + std::to_string(t) + " is not a grid node");
    return m;
}

std::size_t GridSpec::window_index_of(double t) const {
    if (t >= 0) return m_neg + index_of(t);
    const double tol = 1e-9 * delta;
    if (std::abs(t + t_neg) <= tol) return 0;
    const auto back = static_cast<std::size_t>(std::llround(-t / delta));
    if (back > m_neg || std::abs(window_time(m_neg - back) - t) > tol)
        throw IndexError("grid: time " + std::to_string(t) + " is not a grid node");
    return m_neg - back;
}

GridSpec GridSpec::refined() const {
    if (!is_multiple(t_max, delta, m_count) || !is_multiple(t_neg, delta, m_neg))
        throw DomainError("grid: refinement needs horizons that are multiples of delta");
    GridSpec g = *this;
    g.delta = delta / 2;
    g.m_count = 2 * m_count;
    g.m_neg = 2 * m_neg;
    return g;
}

// ---------------------------------------------------------------------------

void generate_level(const GridSpec& grid, std::uint64_t master_seed, std::uint32_t replica,
                    std::size_t k, std::span<double> out) {
    if (out.size() != grid.window_nodes()) throw IndexError("generate_level: output size mismatch");
    const auto level = static_cast<std::uint32_t>(k);
    const std::size_t zero = grid.m_neg;
    out[zero] = 0.0;

    // Forward part: Gaussian increments of variance equal to the cell width.
    const std::span<double> pos = out.subspan(zero + 1);
    GaussianStream fwd({master_seed, replica, substream::level_forward(level)});
    fwd.fill(pos);
    const double sd = std::sqrt(grid.delta);
    for (double& z : pos) z *= sd;
    if (grid.m_count > 0) pos.back() *= std::sqrt(grid.width(grid.m_count - 1)) / sd;
    detail::prefix_sum_inplace(pos, 0.0);

    // Backward part from time 0, on its own substream.
    if (grid.m_neg > 0) {
        const std::span<double> neg = out.first(zero);
        GaussianStream bwd({master_seed, replica, substream::level_backward(level)});
        bwd.fill(neg);
        // neg[c] is the increment over the c-th cell counted back from 0.
        for (std::size_t c = 0; c < zero; ++c)
            neg[c] *= std::sqrt(grid.window_time(zero - c) - grid.window_time(zero - c - 1));
        detail::prefix_sum_inplace(neg, 0.0);
        std::reverse(neg.begin(), neg.end());
    }
}

Environment::Environment(std::size_t levels, GridSpec grid, SeedInfo seeds, std::vector<double> data)
    : levels_(levels), grid_(grid), seeds_(seeds), data_(std::move(data)) {
    if (data_.size() != (levels_ + 1) * grid_.window_nodes())
        throw IndexError("environment: data size does not match levels and grid");
}

std::span<const double> Environment::window_prefix(std::size_t k) const {
    if (k > levels_) throw IndexError("environment: level " + std::to_string(k) + " out of range");
    const std::size_t w = grid_.window_nodes();
    return std::span<const double>(data_).subspan(k * w, w);
}

std::span<const double> Environment::prefix(std::size_t k) const {
    return window_prefix(k).subspan(grid_.m_neg);
}

double Environment::increment(std::size_t k, double s, double t) const {
    if (s > t) throw IndexError("environment: increment needs s <= t");
    const auto p = window_prefix(k);
    return p[grid_.window_index_of(t)] - p[grid_.window_index_of(s)];
}

Environment Environment::coarsened() const {
    if (grid_.m_count % 2 != 0 || grid_.m_neg % 2 != 0)
        throw DomainError("environment: coarsening needs an even number of cells");
    GridSpec g = grid_;
    g.delta = 2 * grid_.delta;
    g.m_count = grid_.m_count / 2;
    g.m_neg = grid_.m_neg / 2;
    const std::size_t w_fine = grid_.window_nodes();
    const std::size_t w = g.window_nodes();
    std::vector<double> data((levels_ + 1) * w);
    for (std::size_t k = 0; k <= levels_; ++k)
        for (std::size_t i = 0; i < w; ++i) data[k * w + i] = data_[k * w_fine + 2 * i];
    return Environment(levels_, g, seeds_, std::move(data));
}

Environment Environment::shifted(double c) const {
    std::vector<double> data = data_;
    const std::size_t w = grid_.window_nodes();
    for (std::size_t i = w; i < data.size(); ++i) data[i] += c;
    return Environment(levels_, grid_, seeds_, std::move(data));
}

Environment generate(std::size_t n, const GridSpec& grid, std::uint64_t master_seed,
                     std::uint32_t replica, std::size_t budget) {
    if (n < 1) throw DomainError("generate: need at least one level");
    const std::size_t w = grid.window_nodes();
    if ((n + 1) > budget / w)
        throw BudgetError("generate: " + std::to_string(n + 1) + " x " + std::to_string(w) +
                          " values exceed the environment budget of " + std::to_string(budget));
    std::vector<double> data((n + 1) * w);
    for (std::size_t k = 0; k <= n; ++k)
        generate_level(grid, master_seed, replica, k, std::span<double>(data).subspan(k * w, w));
    return Environment(n, grid, SeedInfo{master_seed, replica, false}, std::move(data));
}

Environment zero_environment(std::size_t n, const GridSpec& grid) {
    return Environment(n, grid, SeedInfo{0, 0, true},
                       std::vector<double>((n + 1) * grid.window_nodes(), 0.0));
}

EnvironmentStream::EnvironmentStream(std::size_t n, const GridSpec& fine_grid,
                                     std::uint64_t master_seed, std::uint32_t replica,
                                     std::size_t stride)
    : levels_(n), fine_(fine_grid), grid_(fine_grid), seed_(master_seed), replica_(replica),
      stride_(stride) {
    if (stride == 0) throw DomainError("environment stream: stride must be >= 1");
    if (stride > 1) {
        if (fine_.m_count % stride != 0 || fine_.m_neg % stride != 0)
            throw DomainError("environment stream: stride must divide the cell counts");
        grid_.delta = fine_.delta * static_cast<double>(stride);
        grid_.m_count = fine_.m_count / stride;
        grid_.m_neg = fine_.m_neg / stride;
    }
}

std::span<const double> EnvironmentStream::window_level(std::size_t k,
                                                        std::vector<double>& scratch) const {
    if (k > levels_) throw IndexError("environment stream: level out of range");
    const std::size_t w_fine = fine_.window_nodes();
    scratch.resize(w_fine);
    generate_level(fine_, seed_, replica_, k, scratch);
    if (stride_ == 1) return scratch;
    const std::size_t w = grid_.window_nodes();
    for (std::size_t i = 0; i < w; ++i) scratch[i] = scratch[i * stride_];
    return std::span<const double>(scratch).first(w);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kEnvMagic[8] = {'D', 'P', 'B', 'E', 'E', 'N', 'V', '1'};

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IndexError("environment load: truncated input");
    return v;
}

}  // namespace

void dump_environment(const Environment& env, std::ostream& out) {
    const GridSpec& g = env.grid();
    out.write(kEnvMagic, sizeof kEnvMagic);
    put<std::uint64_t>(out, env.levels());
    put<std::uint64_t>(out, g.m_count);
    put<double>(out, g.delta);
    put<double>(out, g.t_max);
    put<double>(out, g.t_neg);
    put<std::uint64_t>(out, g.m_neg);
    put<std::uint64_t>(out, env.seed_info().master_seed);
    put<std::uint32_t>(out, env.seed_info().replica);
    put<std::uint32_t>(out, env.seed_info().zero ? 1u : 0u);
    const auto raw = env.raw();
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(double)));
    if (!out) throw IndexError("environment dump: write failed");
}

Environment load_environment(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kEnvMagic, sizeof magic) != 0)
        throw IndexError("environment load: bad magic");
    const auto levels = get<std::uint64_t>(in);
    GridSpec g;
    g.m_count = get<std::uint64_t>(in);
    g.delta = get<double>(in);
    g.t_max = get<double>(in);
    g.t_neg = get<double>(in);
    g.m_neg = get<std::uint64_t>(in);
    SeedInfo seeds;
    seeds.master_seed = get<std::uint64_t>(in);
    seeds.replica = get<std::uint32_t>(in);
    seeds.zero = (get<std::uint32_t>(in) & 1u) != 0;
    std::vector<double> data((levels + 1) * g.window_nodes());
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw IndexError("environment load: truncated data");
    return Environment(levels, g, seeds, std::move(data));
}

void dump_environment(const Environment& env, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IndexError("environment dump: cannot open " + path);
    dump_environment(env, out);
}

Environment load_environment(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IndexError("environment load: cannot open " + path);
    return load_environment(in);
}

}  // namespace dpbe
