"""Triple scoring functions with batched all-entity variants and gradients.

All models score with "higher is better" orientation (distance-based
models are negated).  Complex-valued layouts pack real parts in the
first half of a row and imaginary parts in the second half.  The rotation
model stores relation vectors as phase angles of length D_e / 2; the
trigonometric functions absorb the 2*pi periodicity, so no modular
wrapping is applied.

Backward passes accumulate into caller-provided dense gradient buffers
(the softmax training loss makes entity gradients dense anyway) and
return the gradient w.r.t. the fused relation vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from litrel.errors import ConfigError, ShapeError

MODEL_KINDS = ("transe", "distmult", "complex", "rotate", "tucker")

_NORM_EPS = 1e-12


@dataclass
class EmbeddingTables:
    """Entity and relation embedding matrices (plus core tensor for tucker)."""

    entity: np.ndarray              # float64, |E| x D_e
    relation: np.ndarray            # float64, |R| x D_r
    core: np.ndarray | None = None  # float64, D_e x D_r x D_e (tucker only)

    @property
    def dim_entity(self) -> int:
        return self.entity.shape[1]

    @property
    def dim_relation(self) -> int:
        return self.relation.shape[1]


class TransE:
    """score = -|| e_h + r - e_t ||_p (p = 2 by default, 1 by config)."""

    kind = "transe"

    def __init__(self, norm: int = 2):
        if norm not in (1, 2):
            raise ConfigError(f"transe norm must be 1 or 2, got {norm}")
        self.norm = norm

    def relation_dim(self, dim_entity: int) -> int:
        return dim_entity

    def score(self, tables, h, t, r_lit):
        diff = tables.entity[h] + r_lit - tables.entity[t]
        return -self._length(diff)

    def _length(self, diff):
        if self.norm == 1:
            return np.abs(diff).sum(axis=-1)
        return np.sqrt((diff * diff).sum(axis=-1))

    def all_tails(self, tables, h, r_lit):
        diff = (tables.entity[h] + r_lit)[None, :] - tables.entity
        return -self._length(diff)

    def all_heads(self, tables, t, r_lit):
        diff = tables.entity + (r_lit - tables.entity[t])[None, :]
        return -self._length(diff)

    def backward_tails(self, tables, h, r_lit, g, d_entity, d_core=None):
        diff = (tables.entity[h] + r_lit)[None, :] - tables.entity
        unit = self._unit(diff)
        d_entity += g[:, None] * unit
        common = unit.T @ g
        d_entity[h] -= common
        return -common

    def backward_heads(self, tables, t, r_lit, g, d_entity, d_core=None):
        diff = tables.entity + (r_lit - tables.entity[t])[None, :]
        unit = self._unit(diff)
        d_entity -= g[:, None] * unit
        common = unit.T @ g
        d_entity[t] += common
        return -common

    def _unit(self, diff):
        if self.norm == 1:
            return np.sign(diff)
        n = np.sqrt((diff * diff).sum(axis=-1))
        return diff / np.maximum(n, _NORM_EPS)[:, None]


class DistMult:
    """score = sum(e_h * r * e_t), symmetric in head and tail."""

    kind = "distmult"

    def relation_dim(self, dim_entity: int) -> int:
        return dim_entity

    def score(self, tables, h, t, r_lit):
        return float(np.sum(tables.entity[h] * r_lit * tables.entity[t]))

    def all_tails(self, tables, h, r_lit):
        return tables.entity @ (tables.entity[h] * r_lit)

    def all_heads(self, tables, t, r_lit):
        return tables.entity @ (tables.entity[t] * r_lit)

    def backward_tails(self, tables, h, r_lit, g, d_entity, d_core=None):
        v = tables.entity[h] * r_lit
        d_entity += np.outer(g, v)
        w = tables.entity.T @ g
        d_entity[h] += w * r_lit
        return w * tables.entity[h]

    def backward_heads(self, tables, t, r_lit, g, d_entity, d_core=None):
        v = tables.entity[t] * r_lit
        d_entity += np.outer(g, v)
        w = tables.entity.T @ g
        d_entity[t] += w * r_lit
        return w * tables.entity[t]


class ComplEx:
    """score = Re(<e_h, r, conj(e_t)>) over complex-packed rows."""

    kind = "complex"

    def relation_dim(self, dim_entity: int) -> int:
        return dim_entity

    @staticmethod
    def _halves(row):
        m = row.shape[-1] // 2
        return row[..., :m], row[..., m:]

    def score(self, tables, h, t, r_lit):
        a, b = self._halves(tables.entity[h])
        c, d = self._halves(r_lit)
        e, f = self._halves(tables.entity[t])
        return float(np.sum(e * (a * c - b * d) + f * (a * d + b * c)))

    def all_tails(self, tables, h, r_lit):
        a, b = self._halves(tables.entity[h])
        c, d = self._halves(r_lit)
        ent_re, ent_im = self._halves(tables.entity)
        return ent_re @ (a * c - b * d) + ent_im @ (a * d + b * c)

    def all_heads(self, tables, t, r_lit):
        e, f = self._halves(tables.entity[t])
        c, d = self._halves(r_lit)
        ent_re, ent_im = self._halves(tables.entity)
        return ent_re @ (c * e + d * f) + ent_im @ (c * f - d * e)

    def backward_tails(self, tables, h, r_lit, g, d_entity, d_core=None):
        m = tables.dim_entity // 2
        a, b = self._halves(tables.entity[h])
        c, d = self._halves(r_lit)
        ent_re, ent_im = self._halves(tables.entity)
        p = a * c - b * d
        q = a * d + b * c
        d_entity[:, :m] += np.outer(g, p)
        d_entity[:, m:] += np.outer(g, q)
        w1 = ent_re.T @ g
        w2 = ent_im.T @ g
        d_entity[h, :m] += c * w1 + d * w2
        d_entity[h, m:] += -d * w1 + c * w2
        return np.concatenate([a * w1 + b * w2, -b * w1 + a * w2])

    def backward_heads(self, tables, t, r_lit, g, d_entity, d_core=None):
        m = tables.dim_entity // 2
        e, f = self._halves(tables.entity[t])
        c, d = self._halves(r_lit)
        ent_re, ent_im = self._halves(tables.entity)
        a_vec = c * e + d * f
        b_vec = c * f - d * e
        d_entity[:, :m] += np.outer(g, a_vec)
        d_entity[:, m:] += np.outer(g, b_vec)
        w1 = ent_re.T @ g
        w2 = ent_im.T @ g
        d_entity[t, :m] += c * w1 - d * w2
        d_entity[t, m:] += d * w1 + c * w2
        return np.concatenate([e * w1 + f * w2, f * w1 - e * w2])


class RotatE:
    """score = -|| e_h * exp(i * theta) - e_t || with phase relation vectors."""

    kind = "rotate"

    def relation_dim(self, dim_entity: int) -> int:
        return dim_entity // 2

    @staticmethod
    def _halves(row):
        m = row.shape[-1] // 2
        return row[..., :m], row[..., m:]

    def _check(self, tables, r_lit):
        if r_lit.shape[-1] != tables.dim_entity // 2:
            raise ShapeError(
                f"rotate phase vector has length {r_lit.shape[-1]}, "
                f"expected D_e/2 = {tables.dim_entity // 2}"
            )

    def score(self, tables, h, t, r_lit):
        self._check(tables, r_lit)
        a, b = self._halves(tables.entity[h])
        e, f = self._halves(tables.entity[t])
        cos_t, sin_t = np.cos(r_lit), np.sin(r_lit)
        u = a * cos_t - b * sin_t - e
        v = a * sin_t + b * cos_t - f
        return -float(np.sqrt(np.sum(u * u + v * v)))

    def all_tails(self, tables, h, r_lit):
        self._check(tables, r_lit)
        a, b = self._halves(tables.entity[h])
        cos_t, sin_t = np.cos(r_lit), np.sin(r_lit)
        ra = a * cos_t - b * sin_t
        rb = a * sin_t + b * cos_t
        ent_re, ent_im = self._halves(tables.entity)
        u = ra[None, :] - ent_re
        v = rb[None, :] - ent_im
        return -np.sqrt((u * u + v * v).sum(axis=1))

    def all_heads(self, tables, t, r_lit):
        self._check(tables, r_lit)
        e, f = self._halves(tables.entity[t])
        cos_t, sin_t = np.cos(r_lit), np.sin(r_lit)
        ent_re, ent_im = self._halves(tables.entity)
        u = ent_re * cos_t - ent_im * sin_t - e[None, :]
        v = ent_re * sin_t + ent_im * cos_t - f[None, :]
        return -np.sqrt((u * u + v * v).sum(axis=1))

    def backward_tails(self, tables, h, r_lit, g, d_entity, d_core=None):
        m = tables.dim_entity // 2
        a, b = self._halves(tables.entity[h])
        cos_t, sin_t = np.cos(r_lit), np.sin(r_lit)
        ra = a * cos_t - b * sin_t
        rb = a * sin_t + b * cos_t
        ent_re, ent_im = self._halves(tables.entity)
        u = ra[None, :] - ent_re
        v = rb[None, :] - ent_im
        n = np.maximum(np.sqrt((u * u + v * v).sum(axis=1)), _NORM_EPS)
        coef = (g / n)[:, None]
        d_entity[:, :m] += coef * u
        d_entity[:, m:] += coef * v
        s_re = (coef * u).sum(axis=0)
        s_im = (coef * v).sum(axis=0)
        # d(rotated head) = -s; chain through the rotation
        d_entity[h, :m] += -(s_re * cos_t + s_im * sin_t)
        d_entity[h, m:] += -(-s_re * sin_t + s_im * cos_t)
        return -(s_re * (-a * sin_t - b * cos_t) + s_im * (a * cos_t - b * sin_t))

    def backward_heads(self, tables, t, r_lit, g, d_entity, d_core=None):
        m = tables.dim_entity // 2
        e, f = self._halves(tables.entity[t])
        cos_t, sin_t = np.cos(r_lit), np.sin(r_lit)
        ent_re, ent_im = self._halves(tables.entity)
        u = ent_re * cos_t - ent_im * sin_t - e[None, :]
        v = ent_re * sin_t + ent_im * cos_t - f[None, :]
        n = np.maximum(np.sqrt((u * u + v * v).sum(axis=1)), _NORM_EPS)
        coef = (g / n)[:, None]
        d_entity[:, :m] += -(coef * u * cos_t[None, :] + coef * v * sin_t[None, :])
        d_entity[:, m:] += -(-coef * u * sin_t[None, :] + coef * v * cos_t[None, :])
        d_entity[t, :m] += (coef * u).sum(axis=0)
        d_entity[t, m:] += (coef * v).sum(axis=0)
        d_theta = -(
            (coef * u * (-ent_re * sin_t[None, :] - ent_im * cos_t[None, :])).sum(axis=0)
            + (coef * v * (ent_re * cos_t[None, :] - ent_im * sin_t[None, :])).sum(axis=0)
        )
        return d_theta


class TuckER:
    """score = core tensor contracted with e_h, r and e_t."""

    kind = "tucker"

    def relation_dim(self, dim_entity: int) -> int:
        return dim_entity

    def _check(self, tables):
        if tables.core is None:
            raise ShapeError("tucker scoring requires a core tensor")

    def score(self, tables, h, t, r_lit):
        self._check(tables)
        v = np.einsum("p,pqs,q->s", tables.entity[h], tables.core, r_lit)
        return float(v @ tables.entity[t])

    def all_tails(self, tables, h, r_lit):
        self._check(tables)
        v = np.einsum("p,pqs,q->s", tables.entity[h], tables.core, r_lit)
        return tables.entity @ v

    def all_heads(self, tables, t, r_lit):
        self._check(tables)
        v = np.einsum("pqs,q,s->p", tables.core, r_lit, tables.entity[t])
        return tables.entity @ v

    def backward_tails(self, tables, h, r_lit, g, d_entity, d_core=None):
        self._check(tables)
        v = np.einsum("p,pqs,q->s", tables.entity[h], tables.core, r_lit)
        d_entity += np.outer(g, v)
        w = tables.entity.T @ g
        d_entity[h] += np.einsum("pqs,q,s->p", tables.core, r_lit, w)
        if d_core is not None:
            d_core += np.einsum("p,q,s->pqs", tables.entity[h], r_lit, w)
        return np.einsum("p,pqs,s->q", tables.entity[h], tables.core, w)

    def backward_heads(self, tables, t, r_lit, g, d_entity, d_core=None):
        self._check(tables)
        v = np.einsum("pqs,q,s->p", tables.core, r_lit, tables.entity[t])
        d_entity += np.outer(g, v)
        w = tables.entity.T @ g
        d_entity[t] += np.einsum("p,pqs,q->s", w, tables.core, r_lit)
        if d_core is not None:
            d_core += np.einsum("p,q,s->pqs", w, r_lit, tables.entity[t])
        return np.einsum("p,pqs,s->q", w, tables.core, tables.entity[t])


def make_model(kind: str, transe_norm: int = 2):
    if kind == "transe":
        return TransE(norm=transe_norm)
    if kind == "distmult":
        return DistMult()
    if kind == "complex":
        return ComplEx()
    if kind == "rotate":
        return RotatE()
    if kind == "tucker":
        return TuckER()
    raise ConfigError(f"unknown model kind {kind!r}")


def score(h: int, r_lit: np.ndarray, t: int, model, tables: EmbeddingTables) -> float:
    """Score one triple given the (already fused) relation vector."""
    return float(model.score(tables, h, t, r_lit))


def score_all_tails(h: int, r_lit: np.ndarray, model, tables: EmbeddingTables) -> np.ndarray:
    """Scores of (h, r, e) for every entity e, as one batched operation."""
    return model.all_tails(tables, h, r_lit)


def score_all_heads(t: int, r_lit: np.ndarray, model, tables: EmbeddingTables) -> np.ndarray:
    """Scores of (e, r, t) for every entity e, as one batched operation."""
    return model.all_heads(tables, t, r_lit)
