#pragma once

// Prompt rendering. Substitution is a single left-to-right pass, so text
// inserted for one placeholder is never scanned for another.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "text2flow/error.hpp"
#include "text2flow/prompt_text.hpp"

namespace text2flow::prompts {

struct FewShotExample {
  std::string document;
  std::string graph;
};

inline std::vector<FewShotExample> default_examples(std::size_t shots = verbatim::kFewShot.size()) {
  if (shots > verbatim::kFewShot.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "at most " + std::to_string(verbatim::kFewShot.size()) + " built-in examples are available");
  }
  std::vector<FewShotExample> out;
  for (std::size_t i = 0; i < shots; ++i) {
    out.push_back({std::string(verbatim::kFewShot[i].document), std::string(verbatim::kFewShot[i].graph)});
  }
  return out;
}

namespace detail {

inline bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Length of a "{name}" token starting at `pos`, or 0.
inline std::size_t placeholder_at(std::string_view s, std::size_t pos) {
  if (s[pos] != '{') return 0;
  std::size_t i = pos + 1;
  while (i < s.size() && is_name_char(s[i])) ++i;
  if (i == pos + 1 || i >= s.size() || s[i] != '}') return 0;
  return i - pos + 1;
}

}  // namespace detail

inline std::vector<std::string> placeholders(std::string_view tmpl) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (auto n = detail::placeholder_at(tmpl, i)) {
      out.emplace_back(tmpl.substr(i + 1, n - 2));
      i += n - 1;
    }
  }
  return out;
}

// Every placeholder in `tmpl` must have a value.
inline std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (auto n = detail::placeholder_at(tmpl, i)) {
      const std::string name(tmpl.substr(i + 1, n - 2));
      auto it = values.find(name);
      if (it == values.end()) throw Error(ErrorCode::Precondition, "no value for placeholder {" + name + "}");
      out += it->second;
      i += n - 1;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  return out;
}

inline std::string render_examples(const std::vector<FewShotExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += "## \"Procedural Document\":\n" + ex.document + "\n\n## \"Procedural Graph\":\n\n" + ex.graph + "\n\n";
  }
  return out;
}

inline std::string builder_prompt(std::string_view document, const std::vector<FewShotExample>& examples) {
  return std::string(verbatim::kBuilderPrefix) + render_examples(examples) +
         render(verbatim::kBuilderSuffix, {{"procedural_document", std::string(document)}});
}

inline std::string structure_check_prompt(std::string_view graph, std::string_view document,
                                          std::string_view issues) {
  return render(verbatim::kStructureCheck, {{"extracted_rules", std::string(verbatim::kExtractionRules)},
                                        {"generated_graph", std::string(graph)},
                                        {"procedural_document", std::string(document)},
                                        {"structure_issues", std::string(issues)}});
}

inline std::string logic_check_prompt(std::string_view gateway_trace_text, std::string_view original_document) {
  return render(verbatim::kLogicCheck, {{"gateway_trace_text", std::string(gateway_trace_text)},
                                    {"original_document", std::string(original_document)}});
}

inline std::string numbered_list(const std::vector<std::string>& items) {
  if (items.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += "\n" + std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

inline std::string refine_prompt(const std::vector<FewShotExample>& examples, std::string_view previous_graph,
                                 const std::vector<std::string>& feedback, std::string_view document) {
  return render(verbatim::kRefine, {{"few_shot_examples", "\n\n" + render_examples(examples)},
                                {"generated_graph", std::string(previous_graph)},
                                {"issues_and_revisions", numbered_list(feedback)},
                                {"procedural_document", std::string(document)}});
}

// The two roles below have no published template.

inline constexpr std::string_view kSpanRetrieval =
    R"T2F(Find the sentence or clause of the procedural document that describes the control logic of {subject} in the procedural graph.

### Graph context:
{graph_context}

### Procedural document:
{procedural_document}

Reply with the text copied exactly from the document and nothing else. If the document does not describe this logic, reply with an empty line.)T2F";

inline constexpr std::string_view kVerbalize =
    R"T2F(Describe the control logic of the following procedural graph fragment in one or two plain sentences. Mention every condition and every action it reaches, and say whether the branches are exclusive, inclusive or parallel.

### Graph fragment:
{graph_fragment}

Reply with the description only.)T2F";

inline std::string span_prompt(std::string_view subject, std::string_view graph_context, std::string_view document) {
  return render(kSpanRetrieval, {{"subject", std::string(subject)},
                                 {"graph_context", std::string(graph_context)},
                                 {"procedural_document", std::string(document)}});
}

inline std::string verbalize_prompt(std::string_view fragment) {
  return render(kVerbalize, {{"graph_fragment", std::string(fragment)}});
}

}  // namespace text2flow::prompts
