#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "setrec/errors.hpp"
#include "setrec/tensor.hpp"

namespace setrec {

/// Little binary writer/reader pair for the versioned model container.
/// Fixed-width little-endian integers, raw IEEE doubles, length-prefixed
/// strings. Matrices carry a name so containers stay self-describing.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }

    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }

    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        u64(bits);
    }

    void str(const std::string& s) {
        u64(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void matrix(const std::string& name, const Matrix& m) {
        str(name);
        u64(m.rows);
        u64(m.cols);
        for (double v : m.data) f64(v);
    }

    void str_vec(const std::vector<std::string>& v) {
        u64(v.size());
        for (const auto& s : v) str(s);
    }

    void f64_vec(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }

    /// string -> count map, written in sorted key order for stable bytes.
    void count_map(const std::unordered_map<std::string, std::size_t>& m) {
        std::map<std::string, std::size_t> sorted(m.begin(), m.end());
        u64(sorted.size());
        for (const auto& [k, v] : sorted) {
            str(k);
            u64(v);
        }
    }

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    std::uint8_t u8() {
        int c = in_.get();
        if (c == EOF) throw DataError("model container truncated");
        return static_cast<std::uint8_t>(c);
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

    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string str() {
        std::uint64_t n = u64();
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::uint64_t>(in_.gcount()) != n) throw DataError("model container truncated");
        return s;
    }

    Matrix matrix(const std::string& expected_name) {
        std::string name = str();
        if (name != expected_name)
            throw DataError("model container: expected tensor \"" + expected_name + "\", found \"" + name + "\"");
        Matrix m;
        m.rows = u64();
        m.cols = u64();
        m.data.resize(m.rows * m.cols);
        for (double& v : m.data) v = f64();
        return m;
    }

    std::vector<std::string> str_vec() {
        std::uint64_t n = u64();
        std::vector<std::string> v(n);
        for (auto& s : v) s = str();
        return v;
    }

    std::vector<double> f64_vec() {
        std::uint64_t n = u64();
        std::vector<double> v(n);
        for (double& x : v) x = f64();
        return v;
    }

    std::unordered_map<std::string, std::size_t> count_map() {
        std::uint64_t n = u64();
        std::unordered_map<std::string, std::size_t> m;
        m.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            std::string k = str();
            m[k] = u64();
        }
        return m;
    }

private:
    std::istream& in_;
};

}  // namespace setrec
