"""Independent reference implementations used as test oracles.

Everything here works on an explicit adjacency matrix or plain dicts and
deliberately avoids the package's posting-list code paths, so agreement
between the two is meaningful.
"""

from __future__ import annotations

import math
import random


def matrix_from_postings(n: int, postings: dict[str, list[int]]) -> list[list[bool]]:
    adj = [[False] * n for _ in range(n)]
    for members in postings.values():
        unique = sorted(set(members))
        for i, u in enumerate(unique):
            for v in unique[i + 1 :]:
                adj[u][v] = adj[v][u] = True
    return adj


def matrix_degrees(adj: list[list[bool]]) -> list[int]:
    return [sum(row) for row in adj]


def matrix_edge_count(adj: list[list[bool]]) -> int:
    return sum(matrix_degrees(adj)) // 2


def matrix_neighbors(adj: list[list[bool]], v: int) -> list[int]:
    return [u for u, flag in enumerate(adj[v]) if flag]


def matrix_is_dominating(adj: list[list[bool]], candidate) -> bool:
    chosen = set(candidate)
    n = len(adj)
    for v in range(n):
        if v in chosen:
            continue
        if not any(u in chosen for u in matrix_neighbors(adj, v)):
            return False
    return True


def reference_greedy(adj: list[list[bool]]) -> list[int]:
    """Residual-degree greedy over the matrix, smallest id on ties.

    Coded independently of the heap implementation: a full scan picks the
    maximum each round.
    """
    n = len(adj)
    covered = [False] * n
    candidate = [True] * n
    selected: list[int] = []
    while any(candidate):
        best, best_deg = -1, -1
        for v in range(n):
            if not candidate[v]:
                continue
            residual = sum(
                1 for u in matrix_neighbors(adj, v) if not covered[u]
            )
            if residual > best_deg:
                best, best_deg = v, residual
        selected.append(best)
        covered[best] = True
        candidate[best] = False
        for u in matrix_neighbors(adj, best):
            covered[u] = True
            candidate[u] = False
    return sorted(selected)


def random_postings(
    rng: random.Random, n: int, n_entities: int, max_keys: int = 3
) -> dict[str, list[int]]:
    postings: dict[str, list[int]] = {}
    for v in range(n):
        count = rng.randint(0, min(max_keys, n_entities))
        for key_index in rng.sample(range(n_entities), count):
            postings.setdefault(f"e{key_index}", []).append(v)
    return postings


def gnp_postings(rng: random.Random, n: int, p: float) -> dict[str, list[int]]:
    """G(n, p) encoded as one two-member entity per edge."""
    postings: dict[str, list[int]] = {}
    edge = 0
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                postings[f"edge{edge}"] = [u, v]
                edge += 1
    return postings


def naive_bm25_scores(
    corpus_tokens: list[list[str]], query_tokens: list[str], k1: float = 1.2, b: float = 0.75
) -> list[float]:
    """Direct per-sentence evaluation of the BM25 formula (no index)."""
    indexed = [tokens for tokens in corpus_tokens if tokens]
    n = len(indexed)
    avg_len = sum(len(t) for t in indexed) / n if n else 0.0
    doc_freq: dict[str, int] = {}
    for tokens in corpus_tokens:
        for term in set(tokens):
            doc_freq[term] = doc_freq.get(term, 0) + 1
    scores = []
    for tokens in corpus_tokens:
        if not tokens:
            scores.append(0.0)
            continue
        score = 0.0
        for term in query_tokens:
            tf = tokens.count(term)
            if tf == 0:
                continue
            df = doc_freq[term]
            idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * len(tokens) / avg_len))
        scores.append(score)
    return scores


def naive_token_f1(prediction: str, golds: list[str]) -> float:
    """Bag-of-words F1 written from the definition, max over golds."""
    import re

    def bag(text: str) -> dict[str, int]:
        counts: dict[str, int] = {}
        for token in re.findall(r"[^\W_]+", text.lower(), re.UNICODE):
            counts[token] = counts.get(token, 0) + 1
        return counts

    pred = bag(prediction)
    best = 0.0
    for gold in golds:
        gold_bag = bag(gold)
        overlap = sum(min(count, gold_bag.get(tok, 0)) for tok, count in pred.items())
        if overlap == 0:
            continue
        precision = overlap / sum(pred.values())
        recall = overlap / sum(gold_bag.values())
        best = max(best, 2 * precision * recall / (precision + recall))
    return best
