"""Prompt templates for the three chat-vision tasks.

The texts are fixed contract surfaces: golden-file tests pin them
byte-for-byte, so any edit here must update tests/golden/ as well.
Placeholders are substituted with plain string replacement; user text is
inserted verbatim.
"""

from __future__ import annotations

PART_SELECTION_SYSTEM = (
    "You are an assistant that selects the functional parts of an object that "
    "require a specified component type. Use: (1) the description of the object, "
    "(2) an axonometric image of the AI-generated mesh, and (3) the component "
    "type. Select the minimal set of parts that fulfill the object's "
    "functionality. Output only the part names as specified, no explanations."
)

PART_SELECTION_QUERY = (
    "Given an image of {user_prompt}, identify which parts of the object should "
    "have panel component based on the object's intended functionality. Select "
    "only the minimal number of distinct parts required. Output format: Parts = []"
)

LABEL_MAPPING_SYSTEM = (
    "You are an assistant that maps functional parts of an object to their face "
    "labels in a labeled axonometric mesh. Use: (1) the description of the "
    "object, (2) an image of a labeled mesh, and (3) a list of parts. Select the "
    "minimal set of labels that correspond to the listed parts. Output only the "
    "label numbers, no explanations."
)

LABEL_MAPPING_QUERY = (
    "Given a labeled image of {user_prompt}, select the label numbers that "
    "exactly correspond to the following parts: {parts}. Select only the minimal "
    "set of labels needed. Output format: Labels = []"
)

FEEDBACK_SYSTEM = (
    "You are an assistant that updates component assignments based on user "
    "request. Use: (1) the description of the object, (2) the labeled mesh "
    "image, (3) the user request. Select the minimal set of labels that fulfill "
    "the user request. Output only the label numbers, no explanations."
)

FEEDBACK_QUERY = (
    "Given a labeled image of {user_prompt}, select the label numbers that match "
    "the following request: {user_feedback}. Select only the minimal set of "
    "labels needed. Output format: Labels = []"
)


def part_selection_query(user_prompt: str) -> str:
    return PART_SELECTION_QUERY.replace("{user_prompt}", user_prompt)


def label_mapping_query(user_prompt: str, parts: list[str] | tuple[str, ...]) -> str:
    return LABEL_MAPPING_QUERY.replace("{user_prompt}", user_prompt).replace(
        "{parts}", ", ".join(parts)
    )


def feedback_query(user_prompt: str, user_feedback: str) -> str:
    return FEEDBACK_QUERY.replace("{user_prompt}", user_prompt).replace(
        "{user_feedback}", user_feedback
    )
