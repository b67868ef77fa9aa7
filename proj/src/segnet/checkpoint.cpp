#include "segadv/segnet/checkpoint.hpp"

#include <fstream>

#include "segadv/binary_io.hpp"
#include "segadv/error.hpp"

namespace segadv::segnet {

void write_checkpoint(std::ostream& out, const SegModel& model) {
  const Architecture& a = model.architecture();
  binary::write_magic(out, kCheckpointMagic);
  for (std::uint32_t v : {a.height, a.width, a.channels, a.num_classes, a.stem_channels, a.feature_channels}) {
    binary::write_u32(out, v);
  }
  const auto& params = model.parameters();
  binary::write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    binary::write_u32(out, static_cast<std::uint32_t>(p.rank()));
    for (std::size_t d : p.shape()) binary::write_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const auto& p : params) {
    for (double v : p.values()) binary::write_f64(out, v);
  }
}

SegModel read_checkpoint(std::istream& in) {
  constexpr const char* what = "model checkpoint";
  binary::expect_magic(in, kCheckpointMagic, what);
  Architecture a;
  a.height = binary::read_u32(in, what);
  a.width = binary::read_u32(in, what);
  a.channels = binary::read_u32(in, what);
  a.num_classes = binary::read_u32(in, what);
  a.stem_channels = binary::read_u32(in, what);
  a.feature_channels = binary::read_u32(in, what);
  try {
    a.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
  const auto layout = parameter_layout(a);
  const std::uint32_t count = binary::read_u32(in, what);
  if (count != layout.size()) throw DataError("model checkpoint: unexpected parameter count");
  std::vector<tensor::Shape> shapes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t rank = binary::read_u32(in, what);
    if (rank > 8) throw DataError("model checkpoint: implausible tensor rank");
    tensor::Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(binary::read_u32(in, what));
    if (shape != layout[i].shape) {
      throw DataError("model checkpoint: parameter " + layout[i].name + " has shape " + tensor::to_string(shape) +
                      ", architecture implies " + tensor::to_string(layout[i].shape));
    }
    shapes.push_back(std::move(shape));
  }
  std::vector<Tensor> params;
  for (auto& shape : shapes) {
    std::vector<double> values(tensor::element_count(shape));
    for (double& v : values) v = binary::read_f64(in, what);
    params.emplace_back(std::move(shape), std::move(values));
  }
  binary::expect_end(in, what);
  return SegModel::from_parameters(a, std::move(params));
}

void save_checkpoint(const std::filesystem::path& path, const SegModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, model);
  if (!out) throw DataError("failed writing " + path.string());
}

SegModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace segadv::segnet
