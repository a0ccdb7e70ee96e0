#pragma once

// Dense matrix export. Binary layout: 8-byte magic "WMLDENSE", uint32 rows,
// uint32 cols (little endian), then rows*cols float64 values in row-major order.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "wmlab/errors.hpp"
#include "wmlab/spectral.hpp"

namespace wmlab {

inline constexpr std::array<char, 8> kDenseMagic{'W', 'M', 'L', 'D', 'E', 'N', 'S', 'E'};

static_assert(std::endian::native == std::endian::little, "dense binary format assumes a little-endian host");

inline void write_dense(std::ostream& os, const Eigen::MatrixXd& A) {
    const auto rows = static_cast<std::uint32_t>(A.rows()), cols = static_cast<std::uint32_t>(A.cols());
    os.write(kDenseMagic.data(), kDenseMagic.size());
    os.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    os.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = A;
    os.write(reinterpret_cast<const char*>(R.data()), static_cast<std::streamsize>(sizeof(double) * R.size()));
    if (!os) throw DataError("write_dense: stream error");
}

inline Eigen::MatrixXd read_dense(std::istream& is) {
    std::array<char, 8> magic{};
    std::uint32_t rows = 0, cols = 0;
    is.read(magic.data(), magic.size());
    if (!is || magic != kDenseMagic) throw DataError("read_dense: bad magic");
    is.read(reinterpret_cast<char*>(&rows), sizeof rows);
    is.read(reinterpret_cast<char*>(&cols), sizeof cols);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(rows, cols);
    is.read(reinterpret_cast<char*>(R.data()), static_cast<std::streamsize>(sizeof(double) * R.size()));
    if (!is) throw DataError("read_dense: truncated payload");
    return R;
}

inline void write_dense_file(const std::string& path, const Eigen::MatrixXd& A) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    write_dense(os, A);
}

inline Eigen::MatrixXd read_dense_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path);
    return read_dense(is);
}

/// Comma-separated rows with round-trip precision.
inline std::string to_csv(const Eigen::MatrixXd& A) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) os << (j ? "," : "") << A(i, j);
        os << '\n';
    }
    return os.str();
}

/// "j,lambda_j" with j starting at 1.
inline std::string eigenvalues_csv(const SpectralDecomposition& eig) {
    std::ostringstream os;
    os << std::setprecision(17) << "j,lambda_j\n";
    for (Eigen::Index j = 0; j < eig.eigenvalues.size(); ++j) os << j + 1 << ',' << eig.eigenvalues[j] << '\n';
    return os.str();
}

}  // namespace wmlab
