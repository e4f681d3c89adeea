#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "markov_core.hpp"

namespace mcmclab {

// ---------------------------------------------------------------------------
// Urns, boards and walks

// States 0..N = number of balls in the first urn.
inline StochasticMatrix ehrenfest_matrix(std::size_t N) {
    if (N < 1) fail(Errc::InvalidArgument, "Ehrenfest model needs N >= 1");
    const auto n = static_cast<Eigen::Index>(N + 1);
    Matrix P = Matrix::Zero(n, n);
    const double dN = static_cast<double>(N);
    for (Eigen::Index x = 0; x < n; ++x) {
        if (x > 0) P(x, x - 1) = static_cast<double>(x) / dN;
        if (x < n - 1) P(x, x + 1) = 1.0 - static_cast<double>(x) / dN;
    }
    return StochasticMatrix::validate(std::move(P));
}

// Index i carries magnetization m = 2i - N; p(m -> m+2) = 1/2 - m/(2N).
inline StochasticMatrix magnetization_chain(std::size_t N) {
    if (N < 2) fail(Errc::InvalidArgument, "magnetization chain needs N >= 2");
    const auto n = static_cast<Eigen::Index>(N + 1);
    Matrix P = Matrix::Zero(n, n);
    const double dN = static_cast<double>(N);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = 2.0 * static_cast<double>(i) - dN;
        if (i > 0) P(i, i - 1) = 0.5 + m / (2.0 * dN);
        if (i < n - 1) P(i, i + 1) = 0.5 - m / (2.0 * dN);
    }
    return StochasticMatrix::validate(std::move(P));
}

inline Vector magnetization_values(std::size_t N) {
    Vector m(static_cast<Eigen::Index>(N + 1));
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = 2.0 * static_cast<double>(i) - static_cast<double>(N);
    return m;
}

// Squares indexed rank * 8 + file, both 0..7.
inline std::array<int, 64> knight_move_counts() {
    static constexpr int dr[8] = {1, 2, 2, 1, -1, -2, -2, -1};
    static constexpr int df[8] = {2, 1, -1, -2, -2, -1, 1, 2};
    std::array<int, 64> a{};
    for (int r = 0; r < 8; ++r)
        for (int f = 0; f < 8; ++f)
            for (int k = 0; k < 8; ++k) {
                const int r2 = r + dr[k], f2 = f + df[k];
                if (r2 >= 0 && r2 < 8 && f2 >= 0 && f2 < 8) ++a[static_cast<std::size_t>(r * 8 + f)];
            }
    return a;
}

inline StochasticMatrix knight_chain() {
    static constexpr int dr[8] = {1, 2, 2, 1, -1, -2, -2, -1};
    static constexpr int df[8] = {2, 1, -1, -2, -2, -1, 1, 2};
    const auto counts = knight_move_counts();
    Matrix P = Matrix::Zero(64, 64);
    for (int r = 0; r < 8; ++r)
        for (int f = 0; f < 8; ++f) {
            const int x = r * 8 + f;
            for (int k = 0; k < 8; ++k) {
                const int r2 = r + dr[k], f2 = f + df[k];
                if (r2 >= 0 && r2 < 8 && f2 >= 0 && f2 < 8)
                    P(x, r2 * 8 + f2) = 1.0 / counts[static_cast<std::size_t>(x)];
            }
        }
    return StochasticMatrix::validate(std::move(P));
}

inline StochasticMatrix cycle_walk(std::size_t N, double p) {
    if (N < 3) fail(Errc::InvalidArgument, "cycle walk needs N >= 3");
    if (!(p > 0.0 && p < 1.0)) fail(Errc::ParameterOutOfRange, "p must lie in (0,1)", std::nullopt, p);
    const auto n = static_cast<Eigen::Index>(N);
    Matrix P = Matrix::Zero(n, n);
    for (Eigen::Index x = 0; x < n; ++x) {
        P(x, (x + 1) % n) += p;
        P(x, (x + n - 1) % n) += 1.0 - p;
    }
    return StochasticMatrix::validate(std::move(P));
}

// P[X_n = x] for the symmetric walk on Z started at 0.
inline double z_walk_law(long n, long x) {
    if (n < 0 || std::labs(x) > n || ((n + x) % 2 + 2) % 2 != 0) return 0.0;
    const long k = (n + x) / 2;
    const double logp = std::lgamma(double(n) + 1) - std::lgamma(double(k) + 1) - std::lgamma(double(n - k) + 1) -
                        double(n) * std::log(2.0);
    return std::exp(logp);
}

inline long simulate_z_walk(long n, RngStream& rng) {
    long x = 0;
    for (long i = 0; i < n; ++i) x += (rng.uniform() < 0.5) ? 1 : -1;
    return x;
}

// ---------------------------------------------------------------------------
// Ising model on the circle Z/NZ

struct IsingModel {
    std::size_t N = 2;
    double beta = 0.0;
    double h = 0.0;
    double q = 0.5;

    static IsingModel make(std::size_t N, double beta, double h, double q = -1.0) {
        if (N < 2) fail(Errc::InvalidArgument, "Ising circle needs N >= 2");
        if (!(beta >= 0.0)) fail(Errc::ParameterOutOfRange, "beta must be nonnegative", std::nullopt, beta);
        if (!(h > 0.0 && h <= 1.0)) fail(Errc::ParameterOutOfRange, "h must lie in (0,1]", std::nullopt, h);
        if (q < 0.0) q = 1.0 / static_cast<double>(N);
        if (!(q > 0.0) || q * static_cast<double>(N) > 1.0 + 1e-12)
            fail(Errc::ParameterOutOfRange, "q must satisfy 0 < qN <= 1", std::nullopt, q);
        return IsingModel{N, beta, h, q};
    }
};

struct SpinConfig {
    std::vector<signed char> spins;

    std::size_t size() const { return spins.size(); }
    int operator[](std::size_t k) const { return spins[k]; }
    bool operator==(const SpinConfig&) const = default;

    static SpinConfig all_plus(std::size_t N) { return SpinConfig{std::vector<signed char>(N, 1)}; }
    static SpinConfig all_minus(std::size_t N) { return SpinConfig{std::vector<signed char>(N, -1)}; }
    static SpinConfig alternating(std::size_t N) {
        SpinConfig c{std::vector<signed char>(N, 1)};
        for (std::size_t k = 1; k < N; k += 2) c.spins[k] = -1;
        return c;
    }
    // Bit k of idx set means spin k is +1.
    static SpinConfig from_index(std::size_t N, std::uint64_t idx) {
        SpinConfig c{std::vector<signed char>(N, -1)};
        for (std::size_t k = 0; k < N; ++k)
            if ((idx >> k) & 1u) c.spins[k] = 1;
        return c;
    }
    std::uint64_t index() const {
        std::uint64_t idx = 0;
        for (std::size_t k = 0; k < spins.size(); ++k)
            if (spins[k] > 0) idx |= (std::uint64_t{1} << k);
        return idx;
    }
};

inline int magnetization(const SpinConfig& x) {
    int m = 0;
    for (auto s : x.spins) m += s;
    return m;
}

// Number of bonds (k, k+1 mod N) with opposite spins.
inline int interfaces(const SpinConfig& x) {
    const std::size_t N = x.size();
    int I = 0;
    for (std::size_t k = 0; k < N; ++k)
        if (x.spins[k] != x.spins[(k + 1) % N]) ++I;
    return I;
}

inline double ising_energy(const IsingModel& model, const SpinConfig& x) {
    return 2.0 * interfaces(x) - model.h * magnetization(x) - static_cast<double>(x.size());
}

// -sum_k x_k x_{k+1} - h sum_k x_k, the bond-sum form on the circle.
inline double ising_energy_pairwise(const IsingModel& model, const SpinConfig& x) {
    const std::size_t N = x.size();
    double bonds = 0.0, field = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        bonds += x.spins[k] * x.spins[(k + 1) % N];
        field += x.spins[k];
    }
    return -bonds - model.h * field;
}

// Energy change when spin k is flipped.
inline double ising_delta(const IsingModel& model, const SpinConfig& x, std::size_t k) {
    const std::size_t N = x.size();
    const int left = x.spins[(k + N - 1) % N];
    const int right = x.spins[(k + 1) % N];
    return 2.0 * x.spins[k] * (left + right + model.h);
}

inline Vector ising_energies(const IsingModel& model) {
    if (model.N > 24) fail(Errc::InvalidArgument, "full enumeration limited to N <= 24");
    const std::uint64_t count = std::uint64_t{1} << model.N;
    Vector H(static_cast<Eigen::Index>(count));
    for (std::uint64_t i = 0; i < count; ++i)
        H(static_cast<Eigen::Index>(i)) = ising_energy(model, SpinConfig::from_index(model.N, i));
    return H;
}

// Single-flip neighbor lists on the configuration hypercube.
inline std::vector<StateSet> glauber_neighbors(std::size_t N) {
    const std::uint64_t count = std::uint64_t{1} << N;
    std::vector<StateSet> adj(count);
    for (std::uint64_t i = 0; i < count; ++i)
        for (std::size_t k = 0; k < N; ++k) adj[i].push_back(static_cast<std::size_t>(i ^ (std::uint64_t{1} << k)));
    return adj;
}

// Gibbs weights exp(-beta H)/Z over all 2^N configurations, by enumeration.
inline Vector gibbs_distribution(const IsingModel& model) {
    const Vector H = ising_energies(model);
    const double Hmin = H.minCoeff();
    Vector w = (-model.beta * (H.array() - Hmin)).exp();
    return w / w.sum();
}

// Size of the plus droplet growing in a sea of minus spins; dH = 4 - 2h is the
// cost of the first flip. A droplet of size 1 can shrink back (rate q) or grow
// (rate 2q); larger droplets only grow; N is absorbing.
inline StochasticMatrix droplet_chain(std::size_t N, double beta, double h, double q) {
    if (N < 3) fail(Errc::InvalidArgument, "droplet chain needs N >= 3");
    if (!(q > 0.0 && 3.0 * q <= 1.0)) fail(Errc::ParameterOutOfRange, "q must satisfy 0 < 3q <= 1", std::nullopt, q);
    const double dH = 4.0 - 2.0 * h;
    const auto n = static_cast<Eigen::Index>(N + 1);
    Matrix P = Matrix::Zero(n, n);
    const double birth = std::exp(-beta * dH);
    P(0, 1) = birth;
    P(0, 0) = 1.0 - birth;
    P(1, 0) = q;
    P(1, 2) = 2.0 * q;
    P(1, 1) = 1.0 - 3.0 * q;
    for (Eigen::Index y = 2; y < n - 1; ++y) {
        P(y, y + 1) = 2.0 * q;
        P(y, y) = 1.0 - 2.0 * q;
    }
    P(n - 1, n - 1) = 1.0;
    return StochasticMatrix::validate(std::move(P));
}

struct DropletTimes {
    double from_two = 0.0;   // E_2[tau_N] = (N-2)/(2q)
    double from_zero = 0.0;  // (3/2) e^{beta dH} + 1/(2q) + E_2[tau_N]
};

inline DropletTimes droplet_closed_form(std::size_t N, double beta, double h, double q) {
    DropletTimes t;
    t.from_two = (static_cast<double>(N) - 2.0) / (2.0 * q);
    t.from_zero = 1.5 * std::exp(beta * (4.0 - 2.0 * h)) + 1.0 / (2.0 * q) + t.from_two;
    return t;
}

// ---------------------------------------------------------------------------
// Bigram text chains

enum class AlphabetPolicy {
    letters_punct,  // letters (any script covered below), space, . , ; : ' ! ?
    sixty,          // a-z, A-Z, space, . , ; : ' ! ?
    all,            // every decoded code point
};

struct CorpusModel {
    std::u32string alphabet;
    Matrix counts;
    double smoothing = 0.0;
    Vector unigram;
    StochasticMatrix P;

    std::size_t symbol_index(char32_t c) const {
        auto it = std::lower_bound(alphabet.begin(), alphabet.end(), c);
        if (it == alphabet.end() || *it != c) return static_cast<std::size_t>(-1);
        return static_cast<std::size_t>(it - alphabet.begin());
    }
};

namespace detail {

// Malformed sequences are skipped byte by byte.
inline std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    std::size_t i = 0;
    const auto byte = [&](std::size_t j) { return static_cast<unsigned char>(s[j]); };
    while (i < s.size()) {
        const unsigned char b = byte(i);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b < 0x80) { cp = b; len = 1; }
        else if ((b >> 5) == 0x6) { cp = b & 0x1F; len = 2; }
        else if ((b >> 4) == 0xE) { cp = b & 0x0F; len = 3; }
        else if ((b >> 3) == 0x1E) { cp = b & 0x07; len = 4; }
        else { ++i; continue; }
        if (i + len > s.size()) break;
        bool ok = true;
        for (std::size_t j = 1; j < len; ++j) {
            if ((byte(i + j) >> 6) != 0x2) { ok = false; break; }
            cp = (cp << 6) | (byte(i + j) & 0x3F);
        }
        if (!ok) { ++i; continue; }
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline bool is_ascii_letter(char32_t c) { return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z'); }

// Latin-1 and Latin Extended letters, Greek, Cyrillic.
inline bool is_letter(char32_t c) {
    if (is_ascii_letter(c)) return true;
    if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
    if (c >= 0x370 && c <= 0x3FF) return c != 0x37E && c != 0x387;
    return c >= 0x400 && c <= 0x4FF;
}

inline bool is_kept_punct(char32_t c) {
    return c == U'.' || c == U',' || c == U';' || c == U':' || c == U'\'' || c == U'!' || c == U'?';
}

inline bool is_space(char32_t c) { return c == U' ' || c == U'\n' || c == U'\t' || c == U'\r' || c == 0xA0; }

// Whitespace of any kind becomes one space; runs collapse.
inline std::u32string filter_text(const std::u32string& raw, AlphabetPolicy policy) {
    std::u32string out;
    out.reserve(raw.size());
    for (char32_t c : raw) {
        if (policy != AlphabetPolicy::all && is_space(c)) {
            if (!out.empty() && out.back() != U' ') out.push_back(U' ');
            continue;
        }
        bool keep = false;
        switch (policy) {
        case AlphabetPolicy::letters_punct: keep = is_letter(c) || is_kept_punct(c); break;
        case AlphabetPolicy::sixty: keep = is_ascii_letter(c) || is_kept_punct(c); break;
        case AlphabetPolicy::all: keep = true; break;
        }
        if (keep) out.push_back(c);
    }
    return out;
}

} // namespace detail

inline CorpusModel corpus_fit(std::string_view utf8_text, AlphabetPolicy policy = AlphabetPolicy::letters_punct,
                              double smoothing = 0.0) {
    if (!(smoothing >= 0.0)) fail(Errc::InvalidArgument, "smoothing must be nonnegative");
    const std::u32string text = detail::filter_text(detail::decode_utf8(utf8_text), policy);
    if (text.size() < 2) fail(Errc::EmptyCorpus, "fewer than two symbols remain after filtering");

    CorpusModel model;
    model.smoothing = smoothing;
    model.alphabet = text;
    std::sort(model.alphabet.begin(), model.alphabet.end());
    model.alphabet.erase(std::unique(model.alphabet.begin(), model.alphabet.end()), model.alphabet.end());
    const auto K = static_cast<Eigen::Index>(model.alphabet.size());

    std::vector<std::size_t> idx(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) idx[i] = model.symbol_index(text[i]);
    model.counts = Matrix::Zero(K, K);
    model.unigram = Vector::Zero(K);
    for (std::size_t i = 0; i < text.size(); ++i) {
        model.unigram(static_cast<Eigen::Index>(idx[i])) += 1.0;
        if (i + 1 < text.size())
            model.counts(static_cast<Eigen::Index>(idx[i]), static_cast<Eigen::Index>(idx[i + 1])) += 1.0;
    }
    model.unigram /= model.unigram.sum();

    Matrix P(K, K);
    for (Eigen::Index a = 0; a < K; ++a) {
        const double total = model.counts.row(a).sum() + smoothing * static_cast<double>(K);
        if (total > 0.0)
            P.row(a) = (model.counts.row(a).array() + smoothing) / total;
        else
            P.row(a) = model.unigram.transpose();
    }
    model.P = StochasticMatrix::validate(std::move(P));
    return model;
}

inline std::string corpus_generate(const CorpusModel& model, std::size_t length, RngStream& rng) {
    std::string out;
    if (length == 0) return out;
    const RowSampler sampler(model.P);
    std::size_t s = sample_from(ProbabilityVector::validate(model.unigram), rng);
    detail::append_utf8(out, model.alphabet[s]);
    for (std::size_t i = 1; i < length; ++i) {
        s = sampler.step(s, rng);
        detail::append_utf8(out, model.alphabet[s]);
    }
    return out;
}

} // namespace mcmclab
