"""Writes cleaning_planted.jsonl: 20 instances with the verdict each should get."""
import json

Q = "SELECT ?x WHERE { wd:Q7186 wdt:P184 ?x }"
rows = [
    # kept
    dict(question="Who was the doctoral advisor of Marie Curie?", synthetic_question="What is {doctoral advisor} of {Marie Curie} ?"),
    dict(question="What is the capital city of France?", synthetic_question="What is {capital} of {France} ?"),
    dict(question="How many moons does Jupiter have?"),
    dict(question="Which river flows through Vienna?", answer_labels=["Danube"]),
    dict(question="When was the Eiffel Tower built?", query="SELECT ?d WHERE { wd:Q243 wdt:P571 ?d } ORDER BY ?d LIMIT 1"),
    dict(question="Is Berlin the capital of Germany?", query="ASK { wd:Q183 wdt:P36 wd:Q64 }"),
    dict(question="Na Li won which tennis titles?"),
    dict(question="Who wrote Les Misérables and in which year?", answer_labels=["Victor Hugo", "1862"]),
    dict(question="What is the population of Poland?", synthetic_question="What is {population} of {Poland} ?"),
    dict(question="Name a film directed by Christopher Nolan.", answer_labels=["Inception"]),
    # NULL_TEXT
    dict(question=None),
    dict(question="  na "),
    # SYNTHETIC_LEAK
    dict(question="What is {capital} of {France} ?", synthetic_question="What is {capital} of {France} ?"),
    dict(question="what is the capital of france", synthetic_question="What is the capital of France"),
    # ANSWER_IN_QUESTION
    dict(question="Is Paris the capital of France?", answer_labels=["Paris"]),
    dict(question="Did Marie Curie advise Marguerite Perey?", answer_labels=["Marguerite Perey", "Marie Curie"]),
    # BAD_LENGTH
    dict(question="Capital?"),
    dict(question="Who?  Tell me who advised her, " * 3 + "please, in detail.", synthetic_question="What is {x} ?"),
    # INVALID_TOKENS
    dict(question="Who advised Marie Curie?", query="SELEC ?x WHERE { wd:Q7186 wdt:P184 ?x }"),
    # two reasons at once: too short and broken query
    dict(question="Advisor", query="SELECT ?x WHERE { wd:Q7186 wdt:P184 ?x "),
]
expected = [[] for _ in range(10)] + [["NULL_TEXT"]] * 2 + [["SYNTHETIC_LEAK"]] * 2 + \
    [["ANSWER_IN_QUESTION"]] * 2 + [["BAD_LENGTH"]] * 2 + [["INVALID_TOKENS"], ["BAD_LENGTH", "INVALID_TOKENS"]]

with open("cleaning_planted.jsonl", "w") as f:
    for i, (r, e) in enumerate(zip(rows, expected)):
        rec = {"id": f"c{i:02d}", "question": r["question"], "query": r.get("query", Q), "split": "train"}
        for k in ("synthetic_question", "answer_labels"):
            if k in r:
                rec[k] = r[k]
        rec["expected_reasons"] = e
        f.write(json.dumps(rec, ensure_ascii=False) + "\n")
