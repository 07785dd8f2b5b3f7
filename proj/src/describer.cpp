#include "mtp/describer.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtp/error.hpp"
#include "mtp/hash.hpp"

namespace mtp {

const char* const kFramePrompt =
    "Give me the short descriptions of the actions, facial expressions, postures, "
    "gestures, potential emotions (with valence and arousal)";

namespace {

std::string mime_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".bmp") return "image/bmp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return {};
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

}  // namespace

std::string describe_frame(const std::string& frame_ref, const ModelHandle& vlm) {
  std::filesystem::path path(frame_ref);
  if (!std::filesystem::exists(path))
    throw input_error("frame file '" + frame_ref + "' does not exist");
  std::string mime = mime_for(path);
  if (mime.empty())
    throw input_error("frame file '" + frame_ref + "' has an unsupported image type");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read frame file '" + frame_ref + "'");
  std::ostringstream bytes;
  bytes << in.rdbuf();
  std::string data_url = "data:" + mime + ";base64," + base64_encode(bytes.str());

  ChatMessage msg{"user", kFramePrompt, data_url};
  std::string raw = vlm.vision_chat({std::move(msg)});
  if (raw.empty())
    throw transport_error("vision model returned an empty description for '" +
                          frame_ref + "'");
  return raw;
}

SummaryResult summarize_description(const std::string& raw, const ModelHandle& llm,
                                    int word_limit) {
  if (raw.empty()) throw input_error("summarize_description: empty raw description");
  if (word_limit < 10) throw input_error("summarize_description: word_limit must be >= 10");
  std::string prompt = "Summarize the following scene description in at most " +
                       std::to_string(word_limit) +
                       " words, keeping actions, facial expressions, and emotions: " + raw;
  std::string answer = llm.chat({{"user", prompt, std::nullopt}});

  SummaryResult result;
  std::vector<std::string> words = split_words(answer);
  if (static_cast<int>(words.size()) <= word_limit) {
    result.text = answer;
    return result;
  }
  std::string cut;
  for (int i = 0; i < word_limit; ++i) {
    if (i) cut += ' ';
    cut += words[static_cast<std::size_t>(i)];
  }
  result.text = std::move(cut);
  result.truncated = true;
  return result;
}

void describe_conversation(Conversation& conv, const DescribeOptions& options,
                           const ModelHandle& vlm, const ModelHandle& llm,
                           DescribeWarnings& warnings) {
  if (conv.utterances.empty()) return;
  std::size_t failures = 0;
  for (Utterance& u : conv.utterances) {
    try {
      if (!u.frame_ref)
        throw input_error("utterance " + std::to_string(u.ordinal) + " has no frame_ref");
      std::string raw = describe_frame(*u.frame_ref, vlm);
      SummaryResult summary = summarize_description(raw, llm, options.word_limit);
      if (summary.truncated)
        warnings.add(conv.id + ": utterance " + std::to_string(u.ordinal) +
                     " summary exceeded " + std::to_string(options.word_limit) +
                     " words and was truncated");
      u.visual_description = std::move(summary.text);
    } catch (const Error& e) {
      ++failures;
      u.visual_description = "";
      warnings.add(conv.id + ": utterance " + std::to_string(u.ordinal) +
                   " description failed: " + e.what());
    }
  }
  double ceiling = options.failure_ceiling * static_cast<double>(conv.utterances.size());
  if (static_cast<double>(failures) > ceiling)
    throw input_error(conv.id + ": " + std::to_string(failures) + " of " +
                      std::to_string(conv.utterances.size()) +
                      " utterance descriptions failed, exceeding the failure ceiling");
}

}  // namespace mtp
