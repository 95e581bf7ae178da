"""Seeded synthetic legal corpus + benchmark for offline runs and tests.

Twenty invented contracts/policies across four domains, written so that
the pieces the pipeline relies on actually exist: file names embed the
party names a query will reference, every document is clause-structured
with domain vocabulary, and each benchmark query targets one specific
clause whose exact character span is the ground truth. Everything is a
pure function of the seed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError

DOMAINS = ("contractnli", "cuad", "maud", "privacyqa")

_PARTIES_A = (
    "Zorvex Analytics", "Quillmark Industries", "Brontell Shipping",
    "Calyptra Biotech", "Dunmore Textiles", "Ebrington Capital",
    "Falkwright Media", "Gorsalind Energy", "Hexavale Robotics",
    "Ivorynne Consulting", "Jaspericore Mining", "Kelvaris Software",
    "Lumenford Pharma", "Morrowgate Logistics", "Nyxellar Aerospace",
    "Ombrello Foods", "Pravendale Insurance", "Quorvista Telecom",
    "Rexellion Motors", "Sylvarran Timber",
)
_PARTIES_B = (
    "Tavermont Holdings", "Umbraxis Security", "Vellichor Press",
    "Wyndhaven Resorts", "Xanthelm Chemicals", "Yolandier Fashion",
    "Zephyrine Airways", "Arcovale Banking", "Bellwither Farms",
    "Crommerly Stone", "Drivvenholt Gaming", "Elmsworth Realty",
    "Fennimore Optics", "Grysholt Marine", "Hollowbrant Steel",
    "Ixtabell Cosmetics", "Jorvander Rail", "Kymbrelle Dairy",
    "Lothragon Cement", "Mavrelline Glass",
)

_CUAD_DOC_TYPES = (
    "Services Agreement", "Supply Agreement", "Marketing Affiliate Agreement",
    "License Agreement", "Distribution Agreement",
)

# (clause title, clause body template, benchmark question)
_TOPICS: dict[str, tuple[tuple[str, str, str], ...]] = {
    "contractnli": (
        (
            "Confidentiality Obligations",
            "The Receiving Party shall hold all Confidential Information disclosed "
            "by {a} in strict confidence and shall not disclose any part of it to "
            "third parties without the prior written consent of {a}.",
            "Does the document permit the Receiving Party to disclose Confidential "
            "Information to third parties without prior written consent?",
        ),
        (
            "Return or Destruction",
            "Upon written request of {a}, {b} shall promptly return or destroy all "
            "Confidential Information, provided that {b} may retain one archival "
            "copy solely to demonstrate regulatory compliance.",
            "Does the document permit the Receiving Party to retain some "
            "Confidential Information even after its return or destruction?",
        ),
        (
            "Term and Expiration",
            "This Agreement shall commence on {date} and shall expire {years} years "
            "after that date unless the parties extend it in writing.",
            "What is the expiration date of this agreement?",
        ),
        (
            "Permitted Use",
            "Confidential Information may be used by {b} solely for evaluating the "
            "proposed business relationship and for no other purpose whatsoever.",
            "Is the other side allowed to use the shared information for other projects?",
        ),
        (
            "Injunctive Relief",
            "The parties acknowledge that any breach of the confidentiality "
            "obligations may cause irreparable harm to {a}, entitling {a} to seek "
            "injunctive relief in addition to monetary damages.",
            "What remedies are available to the Disclosing Party in the event of a "
            "breach of the confidentiality obligations?",
        ),
        (
            "No License",
            "Nothing in this Agreement grants {b} any license, interest, or right "
            "in any patent, copyright, or trademark of {a} beyond the limited "
            "right to review the Confidential Information.",
            "Does getting the information give the other side any rights to it?",
        ),
    ),
    "cuad": (
        (
            "Expiration Date",
            "This Agreement shall expire on {date}, unless renewed by mutual "
            "written agreement of {a} and {b} at least {days} days before that date.",
            "What is the expiration date of this contract?",
        ),
        (
            "Termination for Convenience",
            "Either party may terminate this Agreement for convenience upon {days} "
            "days prior written notice to the other party, without penalty or "
            "further obligation except for amounts already accrued.",
            "Can either party end the contract early without giving a reason?",
        ),
        (
            "Exclusivity",
            "During the term, {b} shall purchase the covered products exclusively "
            "from {a} and shall not engage any alternative supplier within the "
            "territory.",
            "Is there an exclusivity obligation restricting the buyer from engaging "
            "alternative suppliers during the term?",
        ),
        (
            "Audit Rights",
            "{a} may audit the books and records of {b} relating to this Agreement "
            "no more than once per calendar year upon {days} days written notice.",
            "How often can the company check the other side's records?",
        ),
        (
            "License Grant",
            "{a} hereby grants {b} a non-exclusive, non-transferable license to use "
            "the licensed materials solely within the territory for the term of "
            "this Agreement.",
            "Does the agreement grant a non-exclusive license restricted to the "
            "territory, and is that license transferable?",
        ),
        (
            "Payment Terms",
            "{b} shall pay all undisputed invoices within {days} days of receipt, "
            "and late amounts shall accrue interest at one percent per month.",
            "When does the buyer have to pay the bills?",
        ),
    ),
    "maud": (
        (
            "Material Adverse Effect",
            "No event shall constitute a Material Adverse Effect to the extent it "
            "arises from general economic conditions that do not disproportionately "
            "affect {a} relative to comparable companies in its industry.",
            "Do general economic changes count as a material adverse effect under "
            "the merger agreement carve-outs?",
        ),
        (
            "Termination Fee",
            "If this Agreement is terminated by {a} to accept a superior proposal, "
            "{a} shall pay {b} a termination fee equal to {amount} million dollars "
            "within two business days of termination.",
            "How much money must be paid if the deal is called off for a better offer?",
        ),
        (
            "Closing Conditions",
            "The obligations of the parties to consummate the merger are "
            "conditioned upon receipt of the required stockholder approval and the "
            "expiration of all applicable regulatory waiting periods.",
            "What approvals are required before the merger can close?",
        ),
        (
            "No-Shop",
            "{a} shall not solicit, initiate, or knowingly encourage any "
            "alternative acquisition proposal, except that the board may respond "
            "to an unsolicited proposal it determines to be a superior proposal.",
            "Is the target company allowed to look for other buyers after signing?",
        ),
        (
            "Regulatory Efforts",
            "Each party shall use reasonable best efforts to obtain all regulatory "
            "clearances, provided that {b} shall not be required to divest assets "
            "generating revenues in excess of {amount} million dollars.",
            "What level of effort must the acquirer expend to obtain regulatory "
            "clearance, and is any divestiture cap specified?",
        ),
        (
            "Appraisal Rights",
            "Shares held by stockholders who have properly exercised appraisal "
            "rights shall not be converted into the merger consideration unless "
            "such rights are withdrawn or lost.",
            "What happens to the shares of people who vote no and ask for an appraisal?",
        ),
    ),
    "privacyqa": (
        (
            "Data Collection",
            "{a} collects account details, device identifiers, and usage history "
            "when you register for or interact with the services described in "
            "this policy.",
            "What kinds of information does the company collect about the people "
            "who use it?",
        ),
        (
            "Cookies",
            "{a} uses cookies and similar tracking technologies to remember "
            "preferences, measure audience, and deliver relevant content, and you "
            "may disable cookies in your browser settings.",
            "Can I turn off the cookies this site uses?",
        ),
        (
            "Third-Party Sharing",
            "{a} does not sell personal information and shares it with service "
            "providers only under written contracts that restrict processing to "
            "documented instructions.",
            "Does the policy permit disclosure of personal information to "
            "third-party service providers, and under what contractual restrictions?",
        ),
        (
            "Data Retention",
            "Personal information is retained for as long as the account remains "
            "active and for up to {years} years afterwards to satisfy legal and "
            "accounting obligations.",
            "How long does the company keep my information after I close the account?",
        ),
        (
            "User Rights",
            "You may request access to, correction of, or deletion of your "
            "personal information by contacting the privacy office of {a}, subject "
            "to verification of your identity.",
            "What rights does the policy grant users regarding access, "
            "rectification, and erasure of their personal information?",
        ),
        (
            "Security",
            "{a} applies encryption in transit, access controls, and periodic "
            "security reviews to protect personal information against unauthorized "
            "access or disclosure.",
            "How does the company keep my information safe?",
        ),
    ),
}

_GENERAL_SENTENCES = (
    "Any notice under this document shall be delivered in writing to the "
    "addresses stated above and shall be deemed received three business days "
    "after posting.",
    "If any provision of this document is held unenforceable, the remaining "
    "provisions shall continue in full force and effect.",
    "This document may not be assigned by either party without the prior "
    "written consent of the other party, which consent shall not be "
    "unreasonably withheld.",
    "This document constitutes the entire understanding of the parties and "
    "supersedes all prior discussions relating to its subject matter.",
    "No waiver of any breach of this document shall be construed as a waiver "
    "of any subsequent breach.",
    "This document may be executed in counterparts, each of which shall be "
    "deemed an original.",
    "The headings in this document are for convenience only and shall not "
    "affect its interpretation.",
    "This document shall be governed by the laws of the state named in the "
    "signature block.",
)

_MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)


def _slug(name: str) -> str:
    return name.replace(" ", "_")


@dataclass(frozen=True)
class SyntheticQuery:
    """One benchmark query with its clause-span ground truth."""

    query: str
    domain: str
    doc_id: str
    span: tuple[int, int]
    answer: str


@dataclass(frozen=True)
class SyntheticDoc:
    doc_id: str
    domain: str
    doc_type: str
    party_a: str
    party_b: str
    text: str
    clause_spans: tuple[tuple[int, int], ...]  # one per topic, in topic order


@dataclass(frozen=True)
class SyntheticData:
    docs: tuple[SyntheticDoc, ...]
    queries: tuple[SyntheticQuery, ...]

    @property
    def documents(self) -> dict[str, str]:
        return {d.doc_id: d.text for d in self.docs}

    def tests_by_domain(self) -> dict[str, list[dict]]:
        """Benchmark JSON bodies, one per domain, in generation order."""
        grouped: dict[str, list[dict]] = {domain: [] for domain in DOMAINS}
        for q in self.queries:
            grouped[q.domain].append(
                {
                    "query": q.query,
                    "snippets": [
                        {
                            "file_path": q.doc_id,
                            "span": [q.span[0], q.span[1]],
                            "answer": q.answer,
                        }
                    ],
                }
            )
        return {domain: tests for domain, tests in grouped.items() if tests}


def _doc_type_for(domain: str, index: int) -> str:
    if domain == "contractnli":
        return "Non-Disclosure Agreement"
    if domain == "cuad":
        return _CUAD_DOC_TYPES[index % len(_CUAD_DOC_TYPES)]
    if domain == "maud":
        return "Merger Agreement"
    return "Privacy Policy"


def _build_doc(
    domain: str,
    index: int,
    party_a: str,
    party_b: str,
    rng: random.Random,
    min_chars: int,
) -> SyntheticDoc:
    doc_type = _doc_type_for(domain, index)
    values = {
        "a": party_a,
        "b": party_b,
        "date": f"{rng.choice(_MONTHS)} {rng.randint(1, 28)}, {rng.randint(2018, 2024)}",
        "days": str(rng.choice((10, 15, 30, 45, 60, 90))),
        "years": str(rng.randint(2, 7)),
        "amount": str(rng.randint(25, 900)),
    }

    if domain == "privacyqa":
        doc_id = f"{domain}/{_slug(party_a)}__Privacy_Policy.txt"
        title = f"Privacy Policy of {party_a}"
        preamble = (
            f"This Privacy Policy describes how {party_a} collects, uses, and "
            f"protects personal information across its products and services."
        )
    else:
        doc_id = f"{domain}/{_slug(party_a)}__{_slug(party_b)}__{_slug(doc_type)}.txt"
        title = f"{doc_type} between {party_a} and {party_b}"
        preamble = (
            f'This {doc_type} (the "Document") is entered into as of '
            f"{values['date']} by and between {party_a} and {party_b}."
        )

    parts = [title, "\n\n", preamble, "\n\n"]
    offset = sum(len(p) for p in parts)
    clause_spans = []
    for i, (clause_title, body_template, _q) in enumerate(_TOPICS[domain], start=1):
        clause = f"Clause {i}: {clause_title}. {body_template.format(**values)}"
        clause_spans.append((offset, offset + len(clause)))
        parts.append(clause)
        parts.append("\n\n")
        offset += len(clause) + 2

    filler_index = 0
    n_topics = len(_TOPICS[domain])
    while offset < min_chars:
        sentence = _GENERAL_SENTENCES[filler_index % len(_GENERAL_SENTENCES)]
        clause = f"Clause {n_topics + filler_index + 1}: General Provisions. {sentence}"
        parts.append(clause)
        parts.append("\n\n")
        offset += len(clause) + 2
        filler_index += 1

    text = "".join(parts).rstrip() + "\n"
    return SyntheticDoc(
        doc_id=doc_id,
        domain=domain,
        doc_type=doc_type,
        party_a=party_a,
        party_b=party_b,
        text=text,
        clause_spans=tuple(clause_spans),
    )


def _query_for(doc: SyntheticDoc, topic_index: int) -> SyntheticQuery:
    _title, _body, question = _TOPICS[doc.domain][topic_index]
    if doc.domain == "privacyqa":
        reference = f"Consider the Privacy Policy of {doc.party_a}"
    else:
        reference = f"Consider the {doc.doc_type} between {doc.party_a} and {doc.party_b}"
    span = doc.clause_spans[topic_index]
    return SyntheticQuery(
        query=f"{reference}; {question}",
        domain=doc.domain,
        doc_id=doc.doc_id,
        span=span,
        answer=doc.text[span[0] : span[1]],
    )


def generate(
    seed: int = 0,
    n_queries: int = 100,
    docs_per_domain: int = 5,
    min_doc_chars: int = 2000,
) -> SyntheticData:
    """Build the dataset: (docs_per_domain × 4) documents, n_queries queries."""
    if docs_per_domain < 1 or n_queries < 1:
        raise ValidationError("need at least one document per domain and one query")
    max_docs = min(len(_PARTIES_A), len(_PARTIES_B)) // len(DOMAINS)
    if docs_per_domain > max_docs:
        raise ValidationError(f"docs_per_domain is capped at {max_docs}")

    doc_rng = random.Random(f"{seed}:docs")
    docs = []
    pair_index = 0
    for domain in DOMAINS:
        for i in range(docs_per_domain):
            docs.append(
                _build_doc(
                    domain, i,
                    _PARTIES_A[pair_index], _PARTIES_B[pair_index],
                    doc_rng, min_doc_chars,
                )
            )
            pair_index += 1

    combos = [
        (doc_index, topic_index)
        for doc_index, doc in enumerate(docs)
        for topic_index in range(len(_TOPICS[doc.domain]))
    ]
    query_rng = random.Random(f"{seed}:queries")
    query_rng.shuffle(combos)
    if n_queries > len(combos):
        combos = [combos[i % len(combos)] for i in range(n_queries)]
    queries = tuple(
        _query_for(docs[doc_index], topic_index)
        for doc_index, topic_index in combos[:n_queries]
    )
    return SyntheticData(docs=tuple(docs), queries=queries)


def write_dataset(data: SyntheticData, root: str | Path) -> dict[str, list[str]]:
    """Materialize as a corpus tree plus per-domain benchmark files.

    Returns the written paths: ``{"corpus": [...], "benchmarks": [...]}``.
    """
    root = Path(root)
    written: dict[str, list[str]] = {"corpus": [], "benchmarks": []}
    for doc in data.docs:
        path = root / "corpus" / doc.doc_id
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(doc.text, encoding="utf-8")
        written["corpus"].append(str(path))
    bench_dir = root / "benchmarks"
    bench_dir.mkdir(parents=True, exist_ok=True)
    for domain, tests in sorted(data.tests_by_domain().items()):
        path = bench_dir / f"{domain}.json"
        path.write_text(
            json.dumps({"tests": tests}, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        written["benchmarks"].append(str(path))
    return written
