#include "segadv/defenses/pipeline.hpp"

#include "segadv/error.hpp"

namespace segadv::defenses {

Pipeline parse_pipeline(std::string_view text) {
  Pipeline out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    std::string_view token = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (token == "nlm") {
      out.push_back(DefenseStage::kNlm);
    } else if (token == "quilt" || token == "iq") {
      out.push_back(DefenseStage::kQuilt);
    } else {
      throw UsageError("unknown defense stage '" + std::string(token) + "' (expected nlm or quilt)");
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string to_string(DefenseStage stage) { return stage == DefenseStage::kNlm ? "nlm" : "quilt"; }

std::string to_string(std::span<const DefenseStage> pipeline) {
  std::string out;
  for (DefenseStage s : pipeline) {
    if (!out.empty()) out += '+';
    out += to_string(s);
  }
  return out.empty() ? "none" : out;
}

Image defend(const Image& image, std::span<const DefenseStage> pipeline, const DefenseContext& context) {
  if (pipeline.empty()) throw UsageError("defense pipeline is empty");
  Image current = image;
  for (DefenseStage stage : pipeline) {
    if (stage == DefenseStage::kNlm) {
      current = nlm_denoise(current, context.nlm);
    } else {
      if (context.quilt_index == nullptr) throw UsageError("quilting stage needs a patch database");
      current = quilt(current, *context.quilt_index);
    }
  }
  return current;
}

}  // namespace segadv::defenses
