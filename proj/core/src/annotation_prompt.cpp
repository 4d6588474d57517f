#include <string>

#include "cotkit/annotator.hpp"
#include "cotkit/error.hpp"
#include "cotkit/text.hpp"

namespace cotkit {

namespace {

constexpr std::string_view kSystemText =
    R"(You are an expert cognitive scientist and logician analyzing the internal Long "Chain of Thought" (CoT) reasoning trajectories of Large Language Models.

Your task is to classify the given reasoning step into one of four strictly defined cognitive actions: `[Propose, Deduce, Verify, Backtrack]`.)";

constexpr std::string_view kUserHead =
    R"(You are provided with two consecutive reasoning steps, [PREVIOUS STEP] and [CURRENT STEP], in a Long CoT reasoning trace.

Please analyze the [CURRENT STEP] and assign ONE of the following four labels.

Note that [PREVIOUS STEP] here is providing you with some necessary context to assist you for analyzing.

**Label Definitions & Constraints:**

**1. Propose (Hypothesis & Exploration)**

- **Definition:** The model is exploring a new idea, setting up a hypothesis, or suggesting an alternative path. It represents the "divergent" phase of reasoning.

- **Significance:** High frequency of this label indicates a highly exploratory, tree-like search structure.

**2. Deduce (Sequential Deduction)**

- **Definition:** The model is executing a mathematical operation or making a direct logical inference based on the *immediately preceding* established facts or the current hypothesis. It represents the "convergent, linear" phase.

- **Significance:** Continuous sequences of this label indicate a dense, high-dependency deductive chain.

**3. Verify (Self-Reflection & Checking)**

- **Definition:** The model pauses its forward progression to double-check an intermediate calculation, verify a condition, or assess if the current path makes sense *without yet abandoning it*.

**4. Backtrack (Error Correction & Path Abandonment)**

- **Definition:** The model explicitly realizes an error or a dead end, rejects the current reasoning branch, and retreats to a previous state or prepares to start over.

**Critical Rules For Annotation:**

**1. Focus STRICTLY on the ACTION in [CURRENT STEP].**

The [PREVIOUS STEP] is strictly for context. Do NOT assign a label based on the tone or action of the [PREVIOUS STEP].

**2. The "Pivot vs. Progress" Test (Crucial for distinguishing Propose vs. Deduce).**

- **Progress (Label → Deduce):** If [CURRENT STEP] simply executes the math, unpacks the logic, or states the direct consequence of the [PREVIOUS STEP] (e.g., solving the equation just proposed), it is making forward progress. *Key signs: "Thus", "So", "Which means", "That would change...", or direct mathematical formulas.*

- **Pivot (Label → Propose):** If [CURRENT STEP] shifts the focus to a NEW angle, introduces a NEW speculation, or brainstorms a different aspect of the problem, it is opening a new branch. *Key signs: The explicit use of words like "Perhaps...", "Alternatively...", "What if...", "Another way..." in the [CURRENT STEP].*

**Output Format:**

Return exactly one label and nothing else:

'<action>' (action here can be 'Propose', 'Deduce', 'Verify', 'Backtrack'.)

**Here is the reasoning step to analyze:**

[PREVIOUS STEP]:

)";

constexpr std::string_view kUserMiddle = R"(

[CURRENT STEP]:

)";

}  // namespace

AnnotationPrompt render_prompt(std::string_view previous_step, std::string_view current_step) {
  if (current_step.empty()) fail(ErrorCode::kInvalidArgument, "current step must be nonempty");
  AnnotationPrompt prompt;
  prompt.system_text = std::string(kSystemText);
  prompt.user_text.reserve(kUserHead.size() + kUserMiddle.size() + previous_step.size() + current_step.size());
  prompt.user_text.append(kUserHead);
  prompt.user_text.append(previous_step);
  prompt.user_text.append(kUserMiddle);
  prompt.user_text.append(current_step);
  return prompt;
}

BehaviorLabel parse_label(std::string_view raw_response) {
  std::string_view s = text::trim(raw_response);
  while (!s.empty() && (s.front() == '\'' || s.front() == '`' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == '\'' || s.back() == '`' || s.back() == '"')) s.remove_suffix(1);
  s = text::trim(s);

  std::optional<BehaviorLabel> found;
  std::size_t distinct = 0;
  for (auto label : kAllLabels) {
    if (text::contains_whole_word(s, label_name(label))) {
      found = label;
      ++distinct;
    }
  }
  if (distinct != 1) {
    fail(ErrorCode::kAnnotation, "unparseable annotator response: \"" + std::string(raw_response) + "\"");
  }
  return *found;
}

}  // namespace cotkit
