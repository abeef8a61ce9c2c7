#include "ctstage/wavelet.hpp"

#include <array>

#include "ctstage/error.hpp"

namespace ctstage {

namespace {

constexpr std::array<double, 2> kHaar{0.7071067811865476, 0.7071067811865476};
constexpr std::array<double, 4> kDb2{-0.12940952255126037, 0.2241438680420134, 0.8365163037378079,
                                     0.48296291314453416};
constexpr std::array<double, 10> kSym5{0.027333068345077982, 0.029519490925774643, -0.039134249302383094,
                                       0.1993975339773936,   0.7234076904024206,   0.6339789634582119,
                                       0.01660210576452232,  -0.17532808990845047, -0.021101834024758855,
                                       0.019538882735286728};

struct FilterPair {
  std::vector<double> low;
  std::vector<double> high;
};

FilterPair filters(Wavelet w) {
  const auto lo = lowpass_filter(w);
  FilterPair f{std::vector<double>(lo.begin(), lo.end()), std::vector<double>(lo.size())};
  const std::size_t n = lo.size();
  for (std::size_t i = 0; i < n; ++i) f.high[i] = (i % 2 == 0 ? 1.0 : -1.0) * lo[n - 1 - i];
  return f;
}

// Half-sample symmetric index into [0, n).
std::size_t mirror(std::size_t i, std::size_t n) {
  const std::size_t period = 2 * n;
  i %= period;
  return i < n ? i : period - 1 - i;
}

// One periodic analysis step on a strided 1-D signal of even length.
void analyze(const double* x, std::size_t len, std::size_t stride, const FilterPair& f, double* lo, double* hi,
             std::size_t out_stride) {
  const std::size_t half = len / 2;
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0, d = 0.0;
    for (std::size_t n = 0; n < f.low.size(); ++n) {
      const double v = x[((2 * k + n) % len) * stride];
      a += f.low[n] * v;
      d += f.high[n] * v;
    }
    lo[k * out_stride] = a;
    hi[k * out_stride] = d;
  }
}

void synthesize(const double* lo, const double* hi, std::size_t half, std::size_t in_stride, const FilterPair& f,
                double* x, std::size_t stride) {
  const std::size_t len = 2 * half;
  for (std::size_t i = 0; i < len; ++i) x[i * stride] = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    const double a = lo[k * in_stride];
    const double d = hi[k * in_stride];
    for (std::size_t n = 0; n < f.low.size(); ++n) x[((2 * k + n) % len) * stride] += f.low[n] * a + f.high[n] * d;
  }
}

// Splits `p` into (low_low, low_high, high_low, high_high) quadrants.
void split2(const Plane& p, const FilterPair& f, Plane& ll, DetailBands& bands) {
  const std::size_t hr = p.rows / 2, hc = p.cols / 2;
  Plane row_lo(p.rows, hc), row_hi(p.rows, hc);
  for (std::size_t r = 0; r < p.rows; ++r)
    analyze(&p.v[r * p.cols], p.cols, 1, f, &row_lo.v[r * hc], &row_hi.v[r * hc], 1);
  ll = Plane(hr, hc);
  bands.low_high = Plane(hr, hc);
  bands.high_low = Plane(hr, hc);
  bands.high_high = Plane(hr, hc);
  for (std::size_t c = 0; c < hc; ++c) {
    analyze(&row_lo.v[c], p.rows, hc, f, &ll.v[c], &bands.high_low.v[c], hc);
    analyze(&row_hi.v[c], p.rows, hc, f, &bands.low_high.v[c], &bands.high_high.v[c], hc);
  }
}

Plane merge2(const Plane& ll, const DetailBands& bands, const FilterPair& f) {
  const std::size_t hr = ll.rows, hc = ll.cols;
  Plane row_lo(2 * hr, hc), row_hi(2 * hr, hc);
  for (std::size_t c = 0; c < hc; ++c) {
    synthesize(&ll.v[c], &bands.high_low.v[c], hr, hc, f, &row_lo.v[c], hc);
    synthesize(&bands.low_high.v[c], &bands.high_high.v[c], hr, hc, f, &row_hi.v[c], hc);
  }
  Plane out(2 * hr, 2 * hc);
  for (std::size_t r = 0; r < 2 * hr; ++r)
    synthesize(&row_lo.v[r * hc], &row_hi.v[r * hc], hc, 1, f, &out.v[r * out.cols], 1);
  return out;
}

}  // namespace

std::string to_string(Wavelet w) {
  switch (w) {
    case Wavelet::Haar: return "haar";
    case Wavelet::Db2: return "db2";
    case Wavelet::Sym5: return "sym5";
  }
  return "haar";
}

Wavelet wavelet_from_string(const std::string& name) {
  if (name == "haar") return Wavelet::Haar;
  if (name == "db2") return Wavelet::Db2;
  if (name == "sym5") return Wavelet::Sym5;
  throw ValidationError("unsupported wavelet '" + name + "' (expected haar, db2 or sym5)");
}

std::span<const double> lowpass_filter(Wavelet w) {
  switch (w) {
    case Wavelet::Haar: return kHaar;
    case Wavelet::Db2: return kDb2;
    case Wavelet::Sym5: return kSym5;
  }
  return kHaar;
}

WaveletDecomposition dwt2(const Plane& input, Wavelet w, std::size_t level) {
  require(level >= 1, "wavelet level must be >= 1");
  require(input.rows > 0 && input.cols > 0, "wavelet input is empty");
  const std::size_t block = std::size_t{1} << level;
  const std::size_t pr = (input.rows + block - 1) / block * block;
  const std::size_t pc = (input.cols + block - 1) / block * block;

  Plane cur(pr, pc);
  for (std::size_t r = 0; r < pr; ++r)
    for (std::size_t c = 0; c < pc; ++c) cur.at(r, c) = input.at(mirror(r, input.rows), mirror(c, input.cols));

  const FilterPair f = filters(w);
  WaveletDecomposition dec;
  dec.wavelet = w;
  dec.rows = input.rows;
  dec.cols = input.cols;
  for (std::size_t l = 0; l < level; ++l) {
    Plane ll;
    DetailBands bands;
    split2(cur, f, ll, bands);
    dec.levels.push_back(std::move(bands));
    cur = std::move(ll);
  }
  dec.approx = std::move(cur);
  return dec;
}

Plane idwt2(const WaveletDecomposition& dec) {
  const FilterPair f = filters(dec.wavelet);
  Plane cur = dec.approx;
  for (std::size_t l = dec.levels.size(); l-- > 0;) cur = merge2(cur, dec.levels[l], f);
  Plane out(dec.rows, dec.cols);
  for (std::size_t r = 0; r < dec.rows; ++r)
    for (std::size_t c = 0; c < dec.cols; ++c) out.at(r, c) = cur.at(r, c);
  return out;
}

}  // namespace ctstage
