#pragma once

// Observation/action space descriptions and the typed data containers that
// travel between an environment and an agent.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "netgym/des.hpp"
#include "netgym/error.hpp"

namespace netgym {

inline constexpr std::size_t kMaxSpaceDepth = 16;

enum class DType : std::uint8_t { kU32 = 0, kI32 = 1, kF32 = 2, kF64 = 3 };

inline std::string_view dtype_name(DType d) {
  switch (d) {
    case DType::kU32: return "u32";
    case DType::kI32: return "i32";
    case DType::kF32: return "f32";
    case DType::kF64: return "f64";
  }
  return "?";
}

inline std::optional<DType> parse_dtype(std::string_view s) {
  if (s == "u32") return DType::kU32;
  if (s == "i32") return DType::kI32;
  if (s == "f32") return DType::kF32;
  if (s == "f64") return DType::kF64;
  return std::nullopt;
}

inline bool is_integral(DType d) { return d == DType::kU32 || d == DType::kI32; }

template <typename T> struct dtype_of;
template <> struct dtype_of<std::uint32_t> { static constexpr DType value = DType::kU32; };
template <> struct dtype_of<std::int32_t> { static constexpr DType value = DType::kI32; };
template <> struct dtype_of<float> { static constexpr DType value = DType::kF32; };
template <> struct dtype_of<double> { static constexpr DType value = DType::kF64; };

using Shape = std::vector<std::uint32_t>;

/// Product of the dimensions. Throws RangeError on an empty shape, a zero
/// dimension or overflow.
inline std::size_t flat_len(const Shape& shape) {
  if (shape.empty()) throw RangeError("shape must have at least one dimension");
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw RangeError("shape dimensions must be positive");
    if (n > std::numeric_limits<std::size_t>::max() / d) throw RangeError("shape size overflows");
    n *= d;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Spaces

struct SpaceSpec;

/// n values, {0..n-1}.
struct DiscreteSpace {
  std::int64_t n = 1;
  bool operator==(const DiscreteSpace&) const = default;
};

/// Scalar bounds applied to every element.
struct BoxSpace {
  double low = 0.0;
  double high = 0.0;
  Shape shape;
  DType dtype = DType::kF32;
  bool operator==(const BoxSpace&) const = default;
};

struct TupleSpace {
  std::vector<SpaceSpec> children;
  bool operator==(const TupleSpace&) const = default;
};

struct DictSpace {
  std::map<std::string, SpaceSpec> entries;
  bool operator==(const DictSpace&) const = default;
};

struct SpaceSpec {
  using Variant = std::variant<DiscreteSpace, BoxSpace, TupleSpace, DictSpace>;
  Variant value;

  SpaceSpec() : value(DiscreteSpace{}) {}
  SpaceSpec(DiscreteSpace s) : value(std::move(s)) {}  // NOLINT(google-explicit-constructor)
  SpaceSpec(BoxSpace s) : value(std::move(s)) {}       // NOLINT(google-explicit-constructor)
  SpaceSpec(TupleSpace s) : value(std::move(s)) {}     // NOLINT(google-explicit-constructor)
  SpaceSpec(DictSpace s) : value(std::move(s)) {}      // NOLINT(google-explicit-constructor)

  bool operator==(const SpaceSpec&) const = default;

  template <typename T> const T* as() const { return std::get_if<T>(&value); }
};

inline SpaceSpec discrete(std::int64_t n) { return DiscreteSpace{n}; }
inline SpaceSpec box(double low, double high, Shape shape, DType dtype) {
  return BoxSpace{low, high, std::move(shape), dtype};
}

namespace detail {

// Integer range actually admissible for an integral Box.
inline std::pair<std::int64_t, std::int64_t> integral_bounds(const BoxSpace& b) {
  const double dmin = b.dtype == DType::kU32 ? 0.0 : static_cast<double>(std::numeric_limits<std::int32_t>::min());
  const double dmax = b.dtype == DType::kU32 ? static_cast<double>(std::numeric_limits<std::uint32_t>::max())
                                             : static_cast<double>(std::numeric_limits<std::int32_t>::max());
  const double lo = std::max(std::ceil(b.low), dmin);
  const double hi = std::min(std::floor(b.high), dmax);
  return {static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)};
}

inline void validate(const SpaceSpec& s, std::size_t depth) {
  if (depth > kMaxSpaceDepth) throw ValidationError("space nesting deeper than 16");
  std::visit(
      [depth](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DiscreteSpace>) {
          if (v.n < 1) throw ValidationError("Discrete requires n >= 1");
        } else if constexpr (std::is_same_v<T, BoxSpace>) {
          if (!std::isfinite(v.low) || !std::isfinite(v.high)) throw ValidationError("Box bounds must be finite");
          if (v.low > v.high) throw ValidationError("Box requires low <= high");
          try {
            flat_len(v.shape);
          } catch (const RangeError& e) {
            throw ValidationError(std::string("Box shape: ") + e.what());
          }
          if (is_integral(v.dtype)) {
            auto [lo, hi] = integral_bounds(v);
            if (lo > hi) throw ValidationError("integral Box admits no value");
          } else if (v.dtype == DType::kF32) {
            if (std::abs(v.low) > std::numeric_limits<float>::max() ||
                std::abs(v.high) > std::numeric_limits<float>::max()) {
              throw ValidationError("f32 Box bounds exceed float range");
            }
            float least = static_cast<float>(v.low);
            if (static_cast<double>(least) < v.low) least = std::nextafter(least, std::numeric_limits<float>::infinity());
            if (static_cast<double>(least) > v.high) throw ValidationError("f32 Box admits no value");
          }
        } else if constexpr (std::is_same_v<T, TupleSpace>) {
          if (v.children.empty()) throw ValidationError("Tuple requires at least one child");
          for (const auto& c : v.children) validate(c, depth + 1);
        } else {
          if (v.entries.empty()) throw ValidationError("Dict requires at least one entry");
          for (const auto& [k, c] : v.entries) validate(c, depth + 1);
        }
      },
      s.value);
}

}  // namespace detail

/// Throws ValidationError describing the first violated constraint.
inline void validate(const SpaceSpec& s) { detail::validate(s, 1); }

inline bool is_valid(const SpaceSpec& s) {
  try {
    validate(s);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Containers

struct DataContainer;

struct DiscreteValue {
  std::int64_t value = 0;
  bool operator==(const DiscreteValue&) const = default;
};

using BoxData = std::variant<std::vector<std::uint32_t>, std::vector<std::int32_t>, std::vector<float>,
                             std::vector<double>>;

/// Flat row-major data; the dtype is the active alternative of `data`.
struct BoxValue {
  Shape shape;
  BoxData data;

  DType dtype() const { return static_cast<DType>(data.index()); }
  std::size_t size() const {
    return std::visit([](const auto& v) { return v.size(); }, data);
  }
  double at(std::size_t i) const {
    return std::visit([i](const auto& v) { return static_cast<double>(v.at(i)); }, data);
  }
  template <typename T> const std::vector<T>& values() const { return std::get<std::vector<T>>(data); }

  bool operator==(const BoxValue&) const = default;
};

struct TupleValue {
  std::vector<DataContainer> items;
  bool operator==(const TupleValue&) const = default;
};

struct DictValue {
  std::map<std::string, DataContainer> entries;
  bool operator==(const DictValue&) const = default;
};

struct DataContainer {
  using Variant = std::variant<DiscreteValue, BoxValue, TupleValue, DictValue>;
  Variant value;

  DataContainer() : value(DiscreteValue{}) {}
  DataContainer(DiscreteValue v) : value(std::move(v)) {}  // NOLINT(google-explicit-constructor)
  DataContainer(BoxValue v) : value(std::move(v)) {}       // NOLINT(google-explicit-constructor)
  DataContainer(TupleValue v) : value(std::move(v)) {}     // NOLINT(google-explicit-constructor)
  DataContainer(DictValue v) : value(std::move(v)) {}      // NOLINT(google-explicit-constructor)

  bool operator==(const DataContainer&) const = default;

  template <typename T> const T* as() const { return std::get_if<T>(&value); }
};

template <typename T>
DataContainer make_box(Shape shape, std::vector<T> data) {
  return BoxValue{std::move(shape), BoxData{std::move(data)}};
}

inline DataContainer make_discrete(std::int64_t v) { return DiscreteValue{v}; }

// ---------------------------------------------------------------------------
// conforms / sample

inline bool conforms(const DataContainer& c, const SpaceSpec& s) {
  if (c.value.index() != s.value.index()) return false;
  return std::visit(
      [&c](const auto& space) -> bool {
        using T = std::decay_t<decltype(space)>;
        if constexpr (std::is_same_v<T, DiscreteSpace>) {
          const auto v = std::get<DiscreteValue>(c.value).value;
          return v >= 0 && v < space.n;
        } else if constexpr (std::is_same_v<T, BoxSpace>) {
          const auto& b = std::get<BoxValue>(c.value);
          if (b.shape != space.shape || b.dtype() != space.dtype) return false;
          std::size_t n = 0;
          try {
            n = flat_len(b.shape);
          } catch (const RangeError&) {
            return false;
          }
          if (b.size() != n) return false;
          for (std::size_t i = 0; i < n; ++i) {
            const double x = b.at(i);
            if (!(x >= space.low && x <= space.high)) return false;
          }
          return true;
        } else if constexpr (std::is_same_v<T, TupleSpace>) {
          const auto& t = std::get<TupleValue>(c.value);
          if (t.items.size() != space.children.size()) return false;
          for (std::size_t i = 0; i < t.items.size(); ++i) {
            if (!conforms(t.items[i], space.children[i])) return false;
          }
          return true;
        } else {
          const auto& d = std::get<DictValue>(c.value);
          if (d.entries.size() != space.entries.size()) return false;
          auto it = d.entries.begin();
          for (const auto& [name, child] : space.entries) {
            if (it->first != name || !conforms(it->second, child)) return false;
            ++it;
          }
          return true;
        }
      },
      s.value);
}

namespace detail {

template <typename F>
std::vector<F> sample_floats(const BoxSpace& b, std::size_t n, RngStream& rng) {
  std::vector<F> out(n);
  for (auto& x : out) {
    F v = static_cast<F>(rng.uniform_real(b.low, b.high));
    // rounding to F may step outside the closed interval
    if (static_cast<double>(v) > b.high) v = static_cast<F>(b.high);
    if (static_cast<double>(v) > b.high) v = std::nextafter(v, static_cast<F>(b.low));
    if (static_cast<double>(v) < b.low) v = std::nextafter(v, static_cast<F>(b.high));
    x = v;
  }
  return out;
}

}  // namespace detail

/// Uniform draw from `s`; integral Box elements are integer-uniform over the
/// admissible integers in [low, high].
inline DataContainer sample(const SpaceSpec& s, RngStream& rng) {
  return std::visit(
      [&rng](const auto& space) -> DataContainer {
        using T = std::decay_t<decltype(space)>;
        if constexpr (std::is_same_v<T, DiscreteSpace>) {
          return DiscreteValue{rng.uniform_int(0, space.n - 1)};
        } else if constexpr (std::is_same_v<T, BoxSpace>) {
          const std::size_t n = flat_len(space.shape);
          switch (space.dtype) {
            case DType::kU32:
            case DType::kI32: {
              auto [lo, hi] = detail::integral_bounds(space);
              if (space.dtype == DType::kU32) {
                std::vector<std::uint32_t> v(n);
                for (auto& x : v) x = static_cast<std::uint32_t>(rng.uniform_int(lo, hi));
                return BoxValue{space.shape, std::move(v)};
              }
              std::vector<std::int32_t> v(n);
              for (auto& x : v) x = static_cast<std::int32_t>(rng.uniform_int(lo, hi));
              return BoxValue{space.shape, std::move(v)};
            }
            case DType::kF32: return BoxValue{space.shape, detail::sample_floats<float>(space, n, rng)};
            case DType::kF64: return BoxValue{space.shape, detail::sample_floats<double>(space, n, rng)};
          }
          throw ValidationError("unknown dtype");
        } else if constexpr (std::is_same_v<T, TupleSpace>) {
          TupleValue t;
          t.items.reserve(space.children.size());
          for (const auto& c : space.children) t.items.push_back(sample(c, rng));
          return t;
        } else {
          DictValue d;
          for (const auto& [k, c] : space.entries) d.entries.emplace(k, sample(c, rng));
          return d;
        }
      },
      s.value);
}

}  // namespace netgym
