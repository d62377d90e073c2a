#include "v2c/evaluation.hpp"

#include <fmt/format.h>

#include "binary_io.hpp"
#include "v2c/error.hpp"
#include "v2c/vocabulary.hpp"

namespace v2c {

EvalOutcome evaluate_all(V2CParams& model, const std::vector<LoadedClip>& clips) {
  if (clips.empty()) throw ValidationError("evaluate: no clips");
  EvalOutcome out;
  std::vector<std::string> truth, from_translation, from_classification;
  for (const auto& clip : clips) {
    const Inference inf = infer_raw(clip.features, model);
    out.pairs.push_back(metrics::EvalPair{clip.record.clip_id, split_words(inf.command), split_words(clip.record.command)});
    out.rows.push_back(EvalRow{clip.record.clip_id, clip.record.command, inf.command, clip.record.action,
                               inf.action_from_translation, inf.action_from_classification.value_or("")});
    truth.push_back(clip.record.action);
    from_translation.push_back(inf.action_from_translation);
    if (inf.action_from_classification) from_classification.push_back(*inf.action_from_classification);
  }
  out.report = metrics::score_pairs(out.pairs);
  out.report.action_success_translation = metrics::action_success_rate(from_translation, truth);
  if (model.config.joint) {
    out.report.action_success_classification = metrics::action_success_rate(from_classification, truth);
  }
  return out;
}

void write_eval_dump(const std::filesystem::path& path, const std::vector<EvalRow>& rows) {
  std::string text;
  for (const auto& r : rows) {
    text += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", r.clip_id, r.reference_command, r.generated_command,
                        r.reference_action, r.action_from_translation, r.action_from_classification);
  }
  detail::write_file(path, std::vector<char>(text.begin(), text.end()));
}

std::string format_report(const metrics::EvalReport& r) {
  std::string s;
  s += "Bleu_1  Bleu_2  Bleu_3  Bleu_4  METEOR  ROUGE_L  CIDEr\n";
  s += fmt::format("{:.3f}   {:.3f}   {:.3f}   {:.3f}   {:.3f}   {:.3f}    {:.3f}\n", r.bleu[0], r.bleu[1], r.bleu[2],
                   r.bleu[3], r.meteor, r.rouge_l, r.cider);
  s += fmt::format("action success (translation branch):    {:.3f}\n", r.action_success_translation);
  if (r.action_success_classification) {
    s += fmt::format("action success (classification branch): {:.3f}\n", *r.action_success_classification);
  } else {
    s += "action success (classification branch): n/a\n";
  }
  return s;
}

}  // namespace v2c
