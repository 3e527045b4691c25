#pragma once

// Narrowband far-field observation model for a half-wavelength ULA:
//   x(t) = A(theta) s(t) + w(t),   [a(theta)]_k = exp(-j pi k sin theta)

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "damusic/errors.hpp"
#include "damusic/linalg.hpp"
#include "damusic/rng.hpp"

namespace damusic {

inline constexpr double kHalfPi = std::numbers::pi / 2.0;
inline constexpr std::size_t kDefaultGridSize = 360;
/// Smallest pairwise DoA gap accepted when drawing random source angles.
inline constexpr double kMinDoaSeparation = 0.05;
inline constexpr int kMaxDoaDraws = 10000;

/// Cell-centre grid over (-pi/2, pi/2): psi_g = -pi/2 + (g + 0.5) pi / G.
inline RealVector doa_grid(std::size_t size = kDefaultGridSize) {
  if (size == 0) throw InvalidInputError("doa_grid: grid size must be positive");
  RealVector out(size);
  const double step = std::numbers::pi / static_cast<double>(size);
  for (std::size_t g = 0; g < size; ++g) out[g] = -kHalfPi + (static_cast<double>(g) + 0.5) * step;
  return out;
}

/// Index of the cell-centre grid point nearest to theta (clamped to the grid).
inline std::size_t nearest_grid_index(double theta, std::size_t size) {
  const double pos = (theta + kHalfPi) / (std::numbers::pi / static_cast<double>(size));
  if (!(pos > 0.0)) return 0;
  return std::min(size - 1, static_cast<std::size_t>(pos));
}

inline ComplexVector steering_vector(double theta, std::size_t m) {
  ComplexVector a(m);
  const double phase_step = -std::numbers::pi * std::sin(theta);
  for (std::size_t k = 0; k < m; ++k) a[k] = std::polar(1.0, phase_step * static_cast<double>(k));
  return a;
}

/// m x d matrix whose column i is steering_vector(thetas[i], m).
inline ComplexMatrix steering_matrix(std::span<const double> thetas, std::size_t m) {
  if (thetas.empty()) throw InvalidInputError("steering_matrix: no angles given");
  ComplexMatrix a(m, thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const auto col = steering_vector(thetas[i], m);
    for (std::size_t k = 0; k < m; ++k) a(k, i) = col[k];
  }
  return a;
}

/// Additive complex offsets, one per (element, grid angle); each entry is
/// circular Gaussian with E|z|^2 = sigma^2.
inline ComplexMatrix perturb_steering(std::size_t m, double sigma, Rng& rng, std::size_t grid_size = kDefaultGridSize) {
  if (!(sigma >= 0.0)) throw InvalidInputError("perturb_steering: sigma must be >= 0");
  ComplexMatrix table(m, grid_size);
  if (sigma == 0.0) return table;
  for (auto& z : table.entries()) z = rng.complex_normal(sigma * sigma);
  return table;
}

struct Scenario {
  std::size_t m = 8;
  std::size_t d = 2;
  std::size_t T = 200;
  double snr_db = 10.0;  // +inf means noiseless
  bool coherent = false;
  double doa_lo = -kHalfPi;
  double doa_hi = kHalfPi;
  double steering_noise_sigma = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first offending field.
  void validate() const {
    if (m < 2) throw ConfigError("scenario.m", "need at least 2 array elements");
    if (d < 1) throw ConfigError("scenario.d", "need at least one source");
    if (d >= m) throw ConfigError("scenario.d", "source count must be smaller than m");
    if (T < 1) throw ConfigError("scenario.T", "need at least one snapshot");
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
      throw ConfigError("scenario.snr_db", "must be finite (or +inf for noiseless)");
    }
    if (!(steering_noise_sigma >= 0.0) || !std::isfinite(steering_noise_sigma)) {
      throw ConfigError("scenario.steering_noise_sigma", "must be finite and >= 0");
    }
    if (!(doa_lo >= -kHalfPi && doa_hi <= kHalfPi && doa_lo < doa_hi)) {
      throw ConfigError("scenario.doa_range", "must be an interval inside [-pi/2, pi/2]");
    }
  }

  double noise_variance() const { return std::isinf(snr_db) ? 0.0 : std::pow(10.0, -snr_db / 10.0); }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct LabeledSample {
  SnapshotMatrix x;  // m x T
  RealVector theta;  // d angles, ascending
};

/// Array response used to synthesize data: nominal ULA steering plus, when the
/// scenario asks for mismatch, a fixed per-array offset table indexed by the
/// nearest grid angle. The table is drawn once per scenario seed from a
/// dedicated stream, so sample streams are identical with and without mismatch.
class ArrayResponse {
 public:
  static constexpr std::uint64_t kTableStreamKey = 0xA77A7AB1EULL;

  ArrayResponse() = default;
  explicit ArrayResponse(const Scenario& scn, std::size_t grid_size = kDefaultGridSize) : m_(scn.m) {
    if (scn.steering_noise_sigma > 0.0) {
      Rng rng = Rng::derive(scn.seed, kTableStreamKey);
      offsets_ = perturb_steering(scn.m, scn.steering_noise_sigma, rng, grid_size);
    }
  }

  bool perturbed() const noexcept { return !offsets_.empty(); }
  const ComplexMatrix& offsets() const noexcept { return offsets_; }

  ComplexMatrix matrix(std::span<const double> thetas) const {
    ComplexMatrix a = steering_matrix(thetas, m_);
    if (!perturbed()) return a;
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      const std::size_t g = nearest_grid_index(thetas[i], offsets_.cols());
      for (std::size_t k = 0; k < m_; ++k) a(k, i) += offsets_(k, g);
    }
    return a;
  }

 private:
  std::size_t m_ = 0;
  ComplexMatrix offsets_;
};

/// Draws d angles i.i.d. uniform on the scenario range, rejecting draws whose
/// minimum pairwise gap is below kMinDoaSeparation. Returned ascending.
inline RealVector draw_doas(const Scenario& scn, Rng& rng) {
  RealVector theta(scn.d);
  for (int attempt = 0; attempt < kMaxDoaDraws; ++attempt) {
    for (auto& t : theta) t = rng.uniform(scn.doa_lo, scn.doa_hi);
    std::sort(theta.begin(), theta.end());
    bool ok = true;
    for (std::size_t i = 1; i < theta.size(); ++i) ok = ok && (theta[i] - theta[i - 1] >= kMinDoaSeparation);
    if (ok) return theta;
  }
  throw ScenarioError("draw_doas: could not satisfy minimum separation " + std::to_string(kMinDoaSeparation) +
                      " rad for d=" + std::to_string(scn.d) + " after " + std::to_string(kMaxDoaDraws) + " draws");
}

/// Synthesizes X for explicitly placed sources. Random draw order: source
/// waveforms (row-major d x T, a single row when coherent), then noise
/// (row-major m x T).
inline LabeledSample generate_sample_at(const Scenario& scn, RealVector theta, Rng& rng, const ArrayResponse& response) {
  if (theta.size() != scn.d) throw DimensionError("generate_sample_at: expected " + std::to_string(scn.d) + " angles");
  const std::size_t t_count = scn.T;
  const std::size_t d = scn.d;

  ComplexMatrix s(d, t_count);
  if (scn.coherent) {
    for (std::size_t t = 0; t < t_count; ++t) s(0, t) = rng.complex_normal();
    for (std::size_t i = 1; i < d; ++i)
      for (std::size_t t = 0; t < t_count; ++t) s(i, t) = s(0, t);
  } else {
    for (auto& z : s.entries()) z = rng.complex_normal();
  }

  LabeledSample out;
  out.x = response.matrix(theta) * s;
  const double noise_var = scn.noise_variance();
  for (auto& z : out.x.entries()) {
    const cplx w = rng.complex_normal(1.0);
    z += std::sqrt(noise_var) * w;
  }
  out.theta = std::move(theta);
  return out;
}

/// d sources at theta0 + k * spacing, theta0 uniform on (doa_lo, doa_hi - (d-1) spacing).
/// Bypasses the minimum-separation guard; used by resolution experiments.
inline LabeledSample generate_spaced_sample(const Scenario& scn, double spacing, Rng& rng, const ArrayResponse& response) {
  const double span = static_cast<double>(scn.d - 1) * spacing;
  if (!(spacing > 0.0) || !(scn.doa_lo + span < scn.doa_hi)) {
    throw ScenarioError("generate_spaced_sample: spacing " + std::to_string(spacing) + " does not fit the DoA range");
  }
  const double first = rng.uniform(scn.doa_lo, scn.doa_hi - span);
  RealVector theta(scn.d);
  for (std::size_t i = 0; i < scn.d; ++i) theta[i] = first + static_cast<double>(i) * spacing;
  return generate_sample_at(scn, std::move(theta), rng, response);
}

inline LabeledSample generate_sample(const Scenario& scn, Rng& rng, const ArrayResponse& response) {
  RealVector theta = draw_doas(scn, rng);
  return generate_sample_at(scn, std::move(theta), rng, response);
}

inline LabeledSample generate_sample(const Scenario& scn, Rng& rng) {
  return generate_sample(scn, rng, ArrayResponse(scn));
}

struct Dataset {
  Scenario scenario;
  std::vector<LabeledSample> samples;
  std::uint64_t config_hash = 0;  // hash of the producing experiment config, 0 if none
};

/// L samples; sample l is drawn from Rng::derive(scenario.seed, l), so the
/// result is a pure function of (scenario, L).
inline Dataset generate_dataset(const Scenario& scn, std::size_t count) {
  scn.validate();
  if (count < 1) throw ConfigError("L", "dataset size must be >= 1");
  const ArrayResponse response(scn);
  Dataset out{scn, {}};
  out.samples.reserve(count);
  for (std::size_t l = 0; l < count; ++l) {
    Rng rng = Rng::derive(scn.seed, l);
    out.samples.push_back(generate_sample(scn, rng, response));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset file format (version 1), all fields little-endian:
//
//   offset  size  field
//   0       8     magic "DAMUSDS1"
//   8       4     u32 format_version (= 1)
//   12      4     u32 m
//   16      4     u32 d
//   20      4     u32 T
//   24      8     u64 L
//   32      8     f64 snr_db
//   40      1     u8  coherent (0/1), followed by 7 zero bytes
//   48      8     u64 seed
//   56      8     f64 steering_noise_sigma
//   64      8     f64 doa_lo
//   72      8     f64 doa_hi
//   80      8     u64 config_hash (0 when not produced from a config)
//   88            L records, each: m*T f64 real parts (row-major m x T),
//                 m*T f64 imaginary parts (same order), d f64 theta.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr char kDatasetMagic[8] = {'D', 'A', 'M', 'U', 'S', 'D', 'S', '1'};
inline constexpr std::size_t kDatasetHeaderBytes = 88;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw PersistenceError("unexpected end of file");
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open " + path.string() + " for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw PersistenceError("read failure on " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw PersistenceError("write failure on " + path.string());
}

}  // namespace detail

inline std::vector<char> encode_dataset(const Dataset& ds) {
  const Scenario& s = ds.scenario;
  detail::ByteWriter w;
  w.raw(kDatasetMagic, sizeof kDatasetMagic);
  w.u32(kDatasetFormatVersion);
  w.u32(static_cast<std::uint32_t>(s.m));
  w.u32(static_cast<std::uint32_t>(s.d));
  w.u32(static_cast<std::uint32_t>(s.T));
  w.u64(ds.samples.size());
  w.f64(s.snr_db);
  w.u8(s.coherent ? 1 : 0);
  for (int i = 0; i < 7; ++i) w.u8(0);
  w.u64(s.seed);
  w.f64(s.steering_noise_sigma);
  w.f64(s.doa_lo);
  w.f64(s.doa_hi);
  w.u64(ds.config_hash);
  for (const auto& sample : ds.samples) {
    if (sample.x.rows() != s.m || sample.x.cols() != s.T || sample.theta.size() != s.d) {
      throw DimensionError("encode_dataset: sample shape does not match scenario");
    }
    for (const auto& z : sample.x.entries()) w.f64(z.real());
    for (const auto& z : sample.x.entries()) w.f64(z.imag());
    for (double t : sample.theta) w.f64(t);
  }
  return std::move(w.buffer());
}

inline Dataset decode_dataset(const std::vector<char>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  if (bytes.size() < kDatasetHeaderBytes || std::memcmp(bytes.data(), kDatasetMagic, sizeof kDatasetMagic) != 0) {
    throw PersistenceError("not a dataset file (bad magic)");
  }
  r.skip(sizeof kDatasetMagic);
  const std::uint32_t version = r.u32();
  if (version != kDatasetFormatVersion) throw PersistenceError("unsupported dataset format_version " + std::to_string(version));
  Dataset ds;
  Scenario& s = ds.scenario;
  s.m = r.u32();
  s.d = r.u32();
  s.T = r.u32();
  const std::uint64_t count = r.u64();
  s.snr_db = r.f64();
  s.coherent = r.u8() != 0;
  r.skip(7);
  s.seed = r.u64();
  s.steering_noise_sigma = r.f64();
  s.doa_lo = r.f64();
  s.doa_hi = r.f64();
  ds.config_hash = r.u64();

  const std::size_t mt = s.m * s.T;
  const std::size_t record_bytes = 8 * (2 * mt + s.d);
  if (record_bytes == 0 || r.remaining() != count * record_bytes) {
    throw PersistenceError("dataset payload size does not match header (L=" + std::to_string(count) + ")");
  }
  ds.samples.resize(count);
  for (auto& sample : ds.samples) {
    sample.x = ComplexMatrix(s.m, s.T);
    auto e = sample.x.entries();
    for (std::size_t i = 0; i < mt; ++i) e[i].real(r.f64());
    for (std::size_t i = 0; i < mt; ++i) e[i].imag(r.f64());
    sample.theta.resize(s.d);
    for (auto& t : sample.theta) t = r.f64();
  }
  return ds;
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  detail::write_file(path, encode_dataset(ds));
}

inline Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(detail::read_file(path)); }

}  // namespace damusic
