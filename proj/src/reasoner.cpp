#include "mtp/reasoner.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include "mtp/error.hpp"
#include "mtp/hash.hpp"

namespace mtp {
namespace {

using nlohmann::json;

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// case-insensitive word search: neighbors must not be word characters
bool contains_word_ci(const std::string& text, const std::string& word) {
  if (word.empty()) return false;
  std::string lo(text);
  for (char& c : lo) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::string w(word);
  for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::size_t pos = 0;
  while ((pos = lo.find(w, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !is_word_char(lo[pos - 1]);
    std::size_t end = pos + w.size();
    bool right_ok = end >= lo.size() || !is_word_char(lo[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

std::string user_task_text(const Conversation& conv, const PromptBundle& bundle,
                           const DetectOptions& options) {
  std::string text = bundle.describing_instruction;
  text += "\n\n";
  text += render_conversation(conv);
  if (options.tracking) {
    text += "\n\n";
    text += bundle.tracking_instruction;
  }
  text += "\n\n";
  text += bundle.commanding_instruction;
  return text;
}

std::size_t prompt_chars(const std::vector<ChatMessage>& messages) {
  std::size_t total = 0;
  for (const ChatMessage& m : messages) total += m.content.size();
  return total;
}

std::string messages_digest(const std::vector<ChatMessage>& messages) {
  std::string joined;
  for (const ChatMessage& m : messages) {
    joined += m.role;
    joined += '\x1f';
    joined += m.content;
    joined += '\x1e';
  }
  return sha256_hex(joined);
}

}  // namespace

PromptBundle PromptBundle::defaults() {
  PromptBundle bundle;
  bundle.system_content =
      "You are a trained chatbot that can find turning points in conversations. A "
      "turning point in a conversation is an identifiable event that leads to an "
      "unexpected and significant transformation in the subjective personal states "
      "(including decisions, behaviors, perspectives, and feelings) of at least one "
      "speaker during the given conversation.";
  bundle.describing_instruction =
      "Read this conversation. Each utterance includes the transcripts and visual "
      "descriptions.";
  bundle.tracking_instruction =
      "Utilize a tracker for each person in the conversation. For each speaker, "
      "provide a concise list of their feelings, behaviors (based on the context and "
      "actions), decisions, and any perspective changes (include those with clear "
      "evidence from the conversation). Limit the list to a maximum of 256 words.";
  bundle.commanding_instruction =
      "Identify the turning point events based on the initial conversation and track "
      "results if there are any. Begin by finding the turning point for each person.";
  bundle.conclusion_instruction =
      "For each found turning point in the prediction, find the starting utterance "
      "index only. Return a list of n utterance start indices corresponding to a "
      "turning point in the prediction. Follow strictly this format in your response: "
      "e.g. utterances = [utterance_5, utterance_25]. Return None if there is no "
      "turning point found. Limit the response to 50 words.";
  return bundle;
}

PromptBundle PromptBundle::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open prompt bundle '" + path + "'");
  json v;
  try {
    v = json::parse(in);
  } catch (const json::parse_error& e) {
    throw parse_error("prompt bundle '" + path + "': " + e.what());
  }
  PromptBundle bundle = defaults();
  auto take = [&](const char* key, std::string& field) {
    if (auto it = v.find(key); it != v.end()) {
      if (!it->is_string())
        throw input_error("prompt bundle: '" + std::string(key) + "' must be a string");
      field = it->get<std::string>();
    }
  };
  take("system_content", bundle.system_content);
  take("describing_instruction", bundle.describing_instruction);
  take("tracking_instruction", bundle.tracking_instruction);
  take("commanding_instruction", bundle.commanding_instruction);
  take("conclusion_instruction", bundle.conclusion_instruction);
  if (auto it = v.find("few_shot"); it != v.end()) {
    if (!it->is_array()) throw input_error("prompt bundle: 'few_shot' must be an array");
    for (const json& je : *it) {
      FewShotExample ex;
      ex.rendered_conversation = je.at("conversation").get<std::string>();
      ex.ideal_answer = je.at("answer").get<std::string>();
      bundle.few_shot.push_back(std::move(ex));
    }
  }
  return bundle;
}

FewShotExample load_few_shot_example(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open few-shot example '" + path + "'");
  json v;
  try {
    v = json::parse(in);
  } catch (const json::parse_error& e) {
    throw parse_error("few-shot example '" + path + "': " + e.what());
  }
  FewShotExample ex;
  if (!v.contains("conversation") || !v.contains("answer"))
    throw input_error("few-shot example '" + path + "' needs 'conversation' and 'answer'");
  ex.rendered_conversation = v["conversation"].get<std::string>();
  ex.ideal_answer = v["answer"].get<std::string>();
  return ex;
}

std::string render_conversation(const Conversation& conv) {
  std::string out;
  for (const Utterance& u : conv.utterances) {
    if (!out.empty()) out += "\n\n";
    out += "utterance_" + std::to_string(u.ordinal) + ":";
    out += "\nspeaker: " + u.speaker;
    out += "\ntranscript: " + u.transcript;
    if (u.visual_description && !u.visual_description->empty())
      out += "\nvisual: " + *u.visual_description;
  }
  return out;
}

std::vector<ChatMessage> build_prompt(const Conversation& conv, const PromptBundle& bundle,
                                      const DetectOptions& options) {
  std::vector<ChatMessage> messages;
  messages.push_back({"system", bundle.system_content, std::nullopt});
  if (options.few_shot) {
    for (const FewShotExample& ex : bundle.few_shot) {
      std::string text = bundle.describing_instruction;
      text += "\n\n";
      text += ex.rendered_conversation;
      if (options.tracking) {
        text += "\n\n";
        text += bundle.tracking_instruction;
      }
      text += "\n\n";
      text += bundle.commanding_instruction;
      messages.push_back({"user", std::move(text), std::nullopt});
      messages.push_back({"assistant", ex.ideal_answer, std::nullopt});
    }
  }
  messages.push_back({"user", user_task_text(conv, bundle, options), std::nullopt});
  return messages;
}

std::string detect(const Conversation& conv, const ModelHandle& llm,
                   const PromptBundle& bundle, const DetectOptions& options,
                   std::vector<std::string>& warnings, std::string* prompt_hash) {
  std::vector<ChatMessage> messages = build_prompt(conv, bundle, options);
  if (prompt_chars(messages) > options.max_prompt_chars) {
    if (options.overflow == DetectOptions::OverflowPolicy::Strict)
      throw input_error(conv.id + ": prompt exceeds the context budget (" +
                        std::to_string(prompt_chars(messages)) + " > " +
                        std::to_string(options.max_prompt_chars) + " chars)");
    // drop the longest visual descriptions until the prompt fits
    Conversation trimmed = conv;
    int dropped = 0;
    while (prompt_chars(messages) > options.max_prompt_chars) {
      Utterance* longest = nullptr;
      for (Utterance& u : trimmed.utterances)
        if (u.visual_description && !u.visual_description->empty() &&
            (!longest || u.visual_description->size() >
                             longest->visual_description->size()))
          longest = &u;
      if (!longest) break;
      longest->visual_description = "";
      ++dropped;
      messages = build_prompt(trimmed, bundle, options);
    }
    if (dropped > 0)
      warnings.push_back(conv.id + ": dropped " + std::to_string(dropped) +
                         " visual descriptions to fit the context budget");
    if (prompt_chars(messages) > options.max_prompt_chars)
      throw input_error(conv.id + ": prompt exceeds the context budget even without "
                        "visual descriptions");
  }
  if (prompt_hash) *prompt_hash = messages_digest(messages);
  return llm.chat(std::move(messages));
}

std::string conclude(const Conversation& conv, const std::string& raw_reasoning,
                     const ModelHandle& llm, const PromptBundle& bundle) {
  if (raw_reasoning.empty()) throw input_error("conclude: empty reasoning text");
  std::string text = bundle.conclusion_instruction;
  text += "\n\n";
  text += raw_reasoning;
  text += "\n\n";
  text += render_conversation(conv);
  std::vector<ChatMessage> messages;
  messages.push_back({"system", bundle.system_content, std::nullopt});
  messages.push_back({"user", std::move(text), std::nullopt});
  return llm.chat(std::move(messages));
}

ParsedConclusion parse_conclusion(const std::string& text, int m) {
  ParsedConclusion result;

  auto extract_tokens = [&](std::string_view inside, std::vector<int>& out) {
    constexpr std::string_view token = "utterance_";
    std::size_t pos = 0;
    while (pos + token.size() <= inside.size()) {
      // case-insensitive token scan
      bool hit = true;
      for (std::size_t k = 0; k < token.size(); ++k)
        if (std::tolower(static_cast<unsigned char>(inside[pos + k])) != token[k]) {
          hit = false;
          break;
        }
      if (!hit || (pos > 0 && is_word_char(inside[pos - 1]))) {
        ++pos;
        continue;
      }
      std::size_t digits = pos + token.size();
      std::size_t end = digits;
      while (end < inside.size() && std::isdigit(static_cast<unsigned char>(inside[end])))
        ++end;
      if (end == digits) {
        pos = digits;
        continue;
      }
      int value = 0;
      auto [ptr, ec] =
          std::from_chars(inside.data() + digits, inside.data() + end, value);
      if (ec != std::errc{} || ptr != inside.data() + end) {
        result.warnings.push_back("unparseable utterance index '" +
                                  std::string(inside.substr(pos, end - pos)) +
                                  "' dropped");
      } else {
        out.push_back(value);
      }
      pos = end;
    }
  };

  // Scan bracket pairs left to right; the first one containing utterance
  // tokens wins. A bare empty bracket counts as an explicit empty list.
  bool saw_empty_bracket = false;
  bool found_list = false;
  std::vector<int> raw_ordinals;
  std::size_t search = 0;
  while (!found_list) {
    std::size_t open = text.find('[', search);
    if (open == std::string::npos) break;
    std::size_t close = text.find(']', open + 1);
    if (close == std::string::npos) break;
    std::string_view inside(text.data() + open + 1, close - open - 1);
    std::vector<int> tokens;
    extract_tokens(inside, tokens);
    if (!tokens.empty()) {
      raw_ordinals = std::move(tokens);
      found_list = true;
    } else if (inside.find_first_not_of(" \t\r\n") == std::string_view::npos) {
      saw_empty_bracket = true;
    }
    search = close + 1;
  }

  if (!found_list) {
    if (saw_empty_bracket || contains_word_ci(text, "none")) return result;
    throw parse_error("conclusion has neither an utterance list nor 'None'");
  }

  for (int value : raw_ordinals) {
    if (value < 1 || value > m) {
      result.warnings.push_back("utterance index " + std::to_string(value) +
                                " outside [1, " + std::to_string(m) + "] dropped");
      continue;
    }
    if (std::find(result.ordinals.begin(), result.ordinals.end(), value) !=
        result.ordinals.end()) {
      result.warnings.push_back("duplicate utterance index " + std::to_string(value) +
                                " dropped");
      continue;
    }
    result.ordinals.push_back(value);
  }
  return result;
}

std::vector<double> ordinals_to_timestamps(const Conversation& conv,
                                           const std::vector<int>& ordinals) {
  std::vector<double> out;
  out.reserve(ordinals.size());
  for (int ordinal : ordinals) {
    const Utterance* found = nullptr;
    for (const Utterance& u : conv.utterances)
      if (u.ordinal == ordinal) {
        found = &u;
        break;
      }
    if (!found)
      throw input_error("ordinal " + std::to_string(ordinal) +
                        " has no utterance in conversation '" + conv.id + "'");
    out.push_back(found->start_s);
  }
  return out;
}

DetectionOutput run_pipeline(const Conversation& conv, const ModelHandle& llm,
                             const PromptBundle& bundle, const DetectOptions& options) {
  DetectionOutput output;
  output.raw_reasoning =
      detect(conv, llm, bundle, options, output.warnings, &output.prompt_hash);
  output.conclusion_raw = conclude(conv, output.raw_reasoning, llm, bundle);

  try {
    ParsedConclusion parsed =
        parse_conclusion(output.conclusion_raw, static_cast<int>(conv.utterances.size()));
    output.ordinals = std::move(parsed.ordinals);
    for (std::string& w : parsed.warnings) output.warnings.push_back(std::move(w));
  } catch (const Error& e) {
    if (options.strict || e.kind() != ErrorKind::Parse) throw;
    output.warnings.push_back(conv.id + ": " + e.what() + "; treated as no turning point");
  }

  if (options.max_predictions && static_cast<int>(output.ordinals.size()) >
                                     *options.max_predictions) {
    output.warnings.push_back(conv.id + ": capped predictions from " +
                              std::to_string(output.ordinals.size()) + " to " +
                              std::to_string(*options.max_predictions));
    output.ordinals.resize(static_cast<std::size_t>(*options.max_predictions));
  }

  output.timestamps = ordinals_to_timestamps(conv, output.ordinals);
  output.has_tp = !output.ordinals.empty();

  // best-effort cause snippets: first reasoning line naming each ordinal
  for (int ordinal : output.ordinals) {
    const std::string needle = "utterance_" + std::to_string(ordinal);
    std::string cause;
    std::size_t start = 0;
    while (start <= output.raw_reasoning.size()) {
      std::size_t nl = output.raw_reasoning.find('\n', start);
      std::string line = output.raw_reasoning.substr(
          start, nl == std::string::npos ? std::string::npos : nl - start);
      std::size_t pos = line.find(needle);
      if (pos != std::string::npos) {
        std::size_t after = pos + needle.size();
        // utterance_2 must not match inside utterance_25
        if (after >= line.size() ||
            !std::isdigit(static_cast<unsigned char>(line[after]))) {
          cause = line;
          break;
        }
      }
      if (nl == std::string::npos) break;
      start = nl + 1;
    }
    output.causes.push_back(std::move(cause));
  }

  if (options.classification_vote) {
    std::string question =
        "Does the conversation contain a turning point? Answer yes or no.\n\n" +
        render_conversation(conv);
    std::vector<ChatMessage> messages;
    messages.push_back({"system", bundle.system_content, std::nullopt});
    messages.push_back({"user", std::move(question), std::nullopt});
    std::string answer = llm.chat(std::move(messages));
    if (contains_word_ci(answer, "yes"))
      output.classification_vote = true;
    else if (contains_word_ci(answer, "no"))
      output.classification_vote = false;
    else
      output.warnings.push_back(conv.id + ": classification vote answer unrecognized");
  }

  return output;
}

}  // namespace mtp
