#include "segadv/attacks/perturbation_io.hpp"

#include <fstream>

#include "segadv/binary_io.hpp"
#include "segadv/error.hpp"

namespace segadv::attacks {

void write_perturbation(std::ostream& out, const Perturbation& perturbation) {
  const auto& v = perturbation.values;
  if (v.rank() != 3) throw ShapeError("perturbation must be H x W x C to be saved");
  binary::write_magic(out, kPerturbationMagic);
  for (std::size_t d : v.shape()) binary::write_u32(out, static_cast<std::uint32_t>(d));
  binary::write_u32(out, perturbation.norm == Norm::kInf ? 0u : 2u);
  binary::write_f64(out, perturbation.epsilon);
  for (double x : v.values()) binary::write_f64(out, x);
}

Perturbation read_perturbation(std::istream& in) {
  constexpr const char* what = "perturbation file";
  binary::expect_magic(in, kPerturbationMagic, what);
  tensor::Shape shape(3);
  for (auto& d : shape) d = binary::read_u32(in, what);
  if (tensor::element_count(shape) == 0 || tensor::element_count(shape) > (1u << 28)) {
    throw DataError("perturbation file: implausible shape " + tensor::to_string(shape));
  }
  const std::uint32_t norm_code = binary::read_u32(in, what);
  if (norm_code != 0 && norm_code != 2) throw DataError("perturbation file: unknown norm code");
  Perturbation p;
  p.norm = norm_code == 0 ? Norm::kInf : Norm::kL2;
  p.epsilon = binary::read_f64(in, what);
  std::vector<double> values(tensor::element_count(shape));
  for (double& x : values) x = binary::read_f64(in, what);
  binary::expect_end(in, what);
  p.values = tensor::Tensor(std::move(shape), std::move(values));
  return p;
}

void save_perturbation(const std::filesystem::path& path, const Perturbation& perturbation) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_perturbation(out, perturbation);
  if (!out) throw DataError("failed writing " + path.string());
}

Perturbation load_perturbation(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open perturbation file " + path.string());
  return read_perturbation(in);
}

}  // namespace segadv::attacks
