#pragma once

// Prompt texts, verbatim. Placeholders are written as {name}.
// Kept byte-identical to tests/golden/*.txt; edit both together.

#include <array>
#include <string_view>

namespace text2flow::prompts::verbatim {

inline constexpr std::string_view kBuilderPrefix = R"T2F(Please generate procedrual graph based on the extraction rules and the procedural document.

### DEFINITIONS and RULES:

The Procedural Graph contains the following types of "Nodes" and "Flows":

"Nodes":
"Start": start node indicates the start of a procedure, represented as "Start".
"End": end node indicates the ending of a procedure, represented as "End".
"Action": action node indicates a specific step in a procedure, represented as the step itself, such as "prepare the ingredients".
"XOR": exclusive gateway, indicates that only one of the following non-sequential actions can be executed, distinguish by numbers, such as "XOR1".
"OR": inclusive gateway, indicates that one or more of the following non-sequential actions can be executed, distinguish by numbers, such as "OR1".
"AND": parallel gateway, indicates that all of the following actions should be executed in parallel, distinguish by numbers, such as "AND1".
"DataObject": DataObject indicates the constraints for the necessary data of the actions, represented as "DataObject(data object)".
"TextAnnotation": TextAnnotation indicates essential notices need to be considered for the execution of the actions, represented as "TextAnnotation(essential notices)".

" Flows":
"SequenceFlow": flow that represents the execution of sequential actions, such as "Start -> prepare the ingredients".
"ConditionFlow": the condition flow is used to indicate that the following action is performed under the condition on the Condition Flow, such as "XOR1 -> (condition1) choose the first one".
"ConstraintFlow": flow that is used to connect the constraints with corresponding actions, such as "prepare the ingredients -> TextAnnotation(essential notices)".

In addition, the actor of corresponding actions is put in the front of corresponding elements to indicate the actor of the following actions if needed, such as "For actor1:".

You should generate the graph in the format of "Node -> Node" line by line until generating the whole graph for the given Procedural Document, and keep the text of the nodes and conditions consistent with the original Procedural Document.

Here are some examples:

)T2F";

inline constexpr std::string_view kBuilderSuffix = R"T2F(### Procedural document: {procedural_document})T2F";

inline constexpr std::string_view kExtractionRules = R"T2F(The Procedural Graph contains the following types of "Nodes" and "Flows":

"Nodes":
"Start": start node indicates the start of a procedure, represented as "Start".
"End": end node indicates the ending of a procedure, represented as "End".
"Action": action node indicates a specific step in a procedure, represented as the step itself, such as "prepare the ingredients".
"XOR": exclusive gateway, indicates that only one of the following non-sequential actions can be executed, distinguish by numbers, such as "XOR1".
"OR": inclusive gateway, indicates that one or more of the following non-sequential actions can be executed, distinguish by numbers, such as "OR1".
"AND": parallel gateway, indicates that all of the following actions should be executed in parallel, distinguish by numbers, such as "AND1".
"DataObject": DataObject indicates the constraints for the necessary data of the actions, represented as "DataObject(data object)".
"TextAnnotation": TextAnnotation indicates essential notices need to be considered for the execution of the actions, represented as "TextAnnotation(essential notices)".

" Flows":
"SequenceFlow": flow that represents the execution of sequential actions, such as "Start -> prepare the ingredients".
"ConditionFlow": the condition flow is used to indicate that the following action is performed under the condition on the Condition Flow, such as "XOR1 -> (condition1) choose the first one".
"ConstraintFlow": flow that is used to connect the constraints with corresponding actions, such as "prepare the ingredients -> TextAnnotation(essential notices)".

In addition, the actor of corresponding actions is put in the front of corresponding elements to indicate the actor of the following actions if needed, such as "For actor1:".)T2F";

inline constexpr std::string_view kStructureCheck = R"T2F(You are **Structure Checker**, an expert in reviewing procedural graphs.
Your task is to review the Procedural Graph generated by **GraphBuilder** and provide constructive feedback for refinement.

### DEFINITIONS and RULES:
{extracted_rules}

### INPUT:
1. The generated Procedural Graph: {generated_graph}.
2. The original Procedural Document: {procedural_document}.
3. The Structure Issues from simulator, which lists structural errors or issues detected in the graph: {structure_issues}.

### Structure Feedback Check:
- For each *Structure Issue*, carefully check whether it is a real structural problem in the graph.
- If the *Structure Issue* is correct, provide a clear, actionable suggestion for how to modify the graph to fix the issue. Prioritize suggestions that add or reconnect nodes/edges, rather than deleting, unless deletion is absolutely necessary.
- If you believe a structure-reported issue is not actually a problem, briefly explain why and state that no action is needed for that issue.
- If the issue is due to missing information in the document, you may suggest minimal additions to ensure graph connectivity, but avoid inventing unrelated content.
- Try to add reasonable nodes, edges, or conditions to the graph to fix the issues, but avoid deleting nodes or edges unless absolutely necessary.
- If the structural issue involves auxiliary nodes (such as **DataObject** or **TextAnnotation**), do **not remove** those nodes or their edges. Instead, **retain them for documentation purposes**, and **add a separate edge to reconnect the execution flow to a valid action or decision node**.

### Important Note on Auxiliary Nodes:
- **DataObject** and **TextAnnotation** are auxiliary nodes used for annotation or reference. They are **not part of the executable process flow** and are **ignored in execution traces**.
- Edges **pointing to** these nodes (e.g., `Action -> TextAnnotation`) are allowed and useful for documentation. However, they **do not count as valid execution paths**.
- If a node only connects to auxiliary nodes, it is still considered a **dead end**. In such cases:
    - **Add a new edge to the next action or decision**, **but keep the original auxiliary edge**.
    - Do **not** delete the auxiliary node or its connection unless it is incorrect or redundant.
- **Do not** use `DataObject` or `TextAnnotation`:
    - As starting points in the graph (`DataObject -> Action` is invalid)
    - As intermediates in loops, branches, or decisions
- The process flow must go through **Action**, **Gateway**, or **Condition** nodes only. Auxiliary nodes may appear in the graph, but only as **side annotations**, not as flow controllers.

### OUTPUT:
If no issues:
APPROVED

If issues are present, use the following format for each, **don't** reply other information:

Issue N
- Problem: <copy or summarize the issue>
- Status: Confirmed / Not a real issue
- Suggestion (if confirmed): <how to fix, ideally by reconnecting, adding or splitting nodes>
- Explanation (if not a real issue): <short justification>)T2F";

inline constexpr std::string_view kLogicCheck = R"T2F(I want you to check whether the gateway segment and its associated text are logically consistent.

### Input:
1. text of gateway segment trace extracted from simulator: {gateway_trace_text}
2. original document segment: {original_document}

### Gateway Identification Guidelines

1. XOR Gateway (Exclusive Gateway)
- Use XOR when only **one** of the possible paths can be taken — the conditions are **mutually exclusive**.
- Typical linguistic signals:
    - "if..., else if..."
    - "if..., however, if..."
    - "if..., on the other hand, if..."
    - "either A or B"
    - "choose one of the following options"
    - "if A, skip B"
    - "otherwise" / "else"
2. OR Gateway (Inclusive Gateway)
- Use OR when **one or more** of the paths may be taken independently or together.
- Typical linguistic signals:
    - "if..., if..., if..." (without “else” or “otherwise”)
    - "also, if..."
    - "similarly, if..."
    - "you may also..."
    - "choose one or more..."
    - "any combination of the following"
3. AND Gateway
- Use AND when **all** following actions must happen, either simultaneously or sequentially.
- Typical linguistic signals:
    - "at the same time..."
    - "meanwhile..."
    - "in parallel..."
    - "do both A and B"
    - "must also do..."
    - "simultaneously perform..."

Here are some examples:

### Input:
OR1: If there is no information about the old supplier, then check the deadline of 4 business days. Otherwise, continue to do the check.

### Output:
OR1: If there is no information about the old supplier, then check the deadline of 4 business days. Otherwise, continue to do the check.
- Status: wrong.
- Revision suggestion: Change OR1 to XOR1.
- Explanation: The phrase uses a classic XOR pattern — “if..., otherwise...”. These are mutually exclusive conditions: either there is no information about the old supplier, or there is. Only one branch is taken at a time, so this logic requires an XOR, not an OR.

Now, I need you to check the following gateways and their corresponding text segments in the Procedural Graph
**Only** output the result block if the status is wrong, otherwise, respond with "APPROVED".

Only output the result block for the current input using the following format:
<Gateway Name>: <text from the document that corresponds to the gateway>
- Status: <status of the gateway, correct or wrong>
- Revision Suggestion: <suggestion to fix the issue, if any>
- Explanation: <explanation of the status, why it is correct or wrong>)T2F";

inline constexpr std::string_view kRefine = R"T2F(The Procedural Graph contains the following types of "Nodes" and "Flows":

"Nodes":
"Start": start node indicates the start of a procedure, represented as "Start".
"End": end node indicates the ending of a procedure, represented as "End".
"Action": action node indicates a specific step in a procedure, represented as the step itself, such as "prepare the ingredients".
"XOR": exclusive gateway, indicates that only one of the following non-sequential actions can be executed, distinguish by numbers, such as "XOR1".
"OR": inclusive gateway, indicates that one or more of the following non-sequential actions can be executed, distinguish by numbers, such as "OR1".
"AND": parallel gateway, indicates that all of the following actions should be executed in parallel, distinguish by numbers, such as "AND1".
"DataObject": DataObject indicates the constraints for the necessary data of the actions, represented as "DataObject(data object)".
"TextAnnotation": TextAnnotation indicates essential notices need to be considered for the execution of the actions, represented as "TextAnnotation(essential notices)".

"Flows":
"SequenceFlow": flow that represents the execution of sequential actions, such as "Start -> prepare the ingredients".
"ConditionFlow": the condition flow is used to indicate that the following action is performed under the condition on the Condition Flow, such as "XOR1 -> (condition1) choose the first one".
"ConstraintFlow": flow that is used to connect the constraints with corresponding actions, such as "prepare the ingredients -> TextAnnotation(essential notices)".

In addition, the actor of corresponding actions is put in the front of corresponding elements to indicate the actor of the following actions if needed, such as "For <actor-name>:". If there is no specific actor mentioned, use "For the process" to indicate the actor of the following actions.

You should generate the graph in the format of "Node -> Node" line by line until generating the whole graph for the given Procedural Document, and keep the text of the nodes and conditions consistent with the original Procedural Document.

Here are some examples: {few_shot_examples}

Previously, another model generated a Procedural Graph, and we have identified several structure issues with it. Please use the list of detected issues and solution suggestions as **references to avoid repeating the same mistakes**.
Don't copy the previously generated Procedural Graph, but use it as a reference to generate a new Procedural Graph that is more accurate and complete.

### "Previously Generated Procedural Graph": {generated_graph}

### "Detected Issues and Solution Suggestions" (you may meet these issues, just refer them as references if available): {issues_and_revisions}

Now you need to generate the corresponding Procedural Graph of the following Procedural Document, if there is no specific actor mentioned, use "For the process" to indicate the actor of the following actions:

### "Procedural Document": {procedural_document})T2F";

struct FewShotText {
  std::string_view document;
  std::string_view graph;
};

inline constexpr std::array<FewShotText, 3> kFewShot = {{

    {R"T2F(Firstly, the customer needs to find an empty seat. If the customer needs dishes, then choose the desired dishes and specify the taste. If the customer needs drinks, then order the drinks and specify the size. The customer then submits the order, which is added to the order list. After enjoying the meal, the customer should choose the payment method. If the credit card is available, the customer pays by credit card; else if the credit card is not available, the customer should pay in cash. For the restaurant, once receiving the order from the order list, it prepares the meal according to the order and prepares the tableware for the customer at the same time. The meal is then served for the customer to enjoy. After that, the restaurant asks the customer to pay for the order and then confirms the payment. Note that the restaurant should provide the receipt if the customer needs. And the procedure ends.)T2F",
     R"T2F(For the customer:
Start -> find an empty seat
find an empty seat -> OR1
OR1 -> (needs dishes) choose the desired dishes
OR1 -> (needs drinks) order the drinks
choose the desired dishes  -> specify the taste
order the drinks -> specify the size
specify the taste -> OR2
specify the size -> OR2
OR2 -> submits the order
submits the order -> DataObject(order list)
submits the order -> enjoy the meal
enjoy the meal -> choose payment method
choose payment method -> XOR1
XOR1 -> (credit card is available) pay by credit card
XOR1 -> (credit card is unavailable) pay in cash
pay by credit card -> XOR2
pay in cash -> XOR2
XOR2 -> End

For the restaurant:
Start -> receive an order
receive an order -> DataObject(order list)
receive an order -> AND1
AND1 -> prepare the meal
AND1 -> prepare the tableware
prepare the meal -> AND2
prepare the tableware -> AND2
AND2 -> serve the meal
serve the meal -> ask the customer to pay for the order
ask the customer to pay for the order -> confirm the payment
confirm the payment -> TextAnnotation(provide the receipt if the customer needs)
confirm the payment -> End)T2F"},

    {R"T2F(In the beginning, the staff will receive an order request, and then checks the order type. If the order is standard type, the sufficience of the stock is checked according to the stock table. If the order is special type, upload the order to the factory system. If the stock is sufficient for standard order, the goods will be directly shipped out, else if the stock is insufficient, they will need to be transferred from other warehouses. After that, the staff updates the order status and provide order information to the user. At the same time, the staff needs to bind order information to user account. Finally, the staff record the request status and the procedure ends.)T2F",
     R"T2F(For the staff:
Start -> receive an order request
receive an order request -> check the order type
check the order type -> XOR1
XOR1 -> (the order is standard type) check the sufficience of the stock
XOR1 -> (the order is special type) upload the order to the factory system
check the sufficience of the stock -> DataObject(the stock table)
check the sufficience of the stock -> XOR2
XOR2 -> (the stock is sufficient) directly shipped out the goods
XOR2 -> (the stock is insufficient) transfer the goods from other warehouses
directly shipped out the goods -> XOR3
transfer the goods from other warehouses -> XOR3
XOR3 -> XOR4
upload the order to the factory system -> XOR4
XOR4 -> AND1
AND1 -> update the order status
update the order status -> provide order information to the user
AND1 -> bind order information to user account
provide order information to the user -> AND2
bind order information to user account -> AND2
AND2 -> record the request status
record the request status -> End)T2F"},

    {R"T2F(Start the service by receiving the email from the electronic mailbox, then parse the email content. If the email contains account query request, reply the account information to the user. If the email contains account modification request, record the information needs to be modified. After that, verify the validity of the account and verify the legality of the modified information at the same time if there exists account information to be modified. Otherwise update the verification timestamp of the account directly. Finally, synchronize the email content to the system and the procedure ends.)T2F",
     R"T2F(For the process:
Start -> receive the email
receive the email -> DataObject(electronic mailbox)
receive the email -> parse the email content
parse the email content -> OR1
OR1 -> (the email contains account query request) reply the account information to the user
OR1 -> (the email contains account modification request) record the information needs to be modified
reply the account information to the user -> OR2
record the information needs to be modified -> OR2
OR2 -> XOR1
XOR1 -> (there exists account information to be modified) AND1
XOR1 -> (otherwise) update the verification timestamp of the account directly
AND1 -> verify the validity of the account
AND1 -> verify the legality of the modified information
verify the validity of the account -> AND2
verify the legality of the modified information -> AND2
AND2 -> XOR2
update the verification timestamp of the account directly -> XOR2
XOR2 -> synchronize the email content to the system
synchronize the email content to the system -> End)T2F"},

}};

}  // namespace text2flow::prompts::verbatim
