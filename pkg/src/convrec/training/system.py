"""The system layer: build models from config, train, evaluate, interact.

A system owns one model per configured sub-task (a joint model may serve
several tasks at once), iterates task dataloaders round-robin within each
epoch, applies the warmup/decay schedule and gradient clipping, early-stops
on a monitored validation metric, and always returns the best checkpoint.
"""

from __future__ import annotations

import copy
import logging
import math
import random
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .. import config as cfg
from ..data.batching import (
    PolicyInstance,
    RecInstance,
    iterate_batches,
    make_instances,
    pad_batch,
)
from ..data.corpus import DatasetBundle, link_entities, tokenize
from ..errors import ConfigError, ModelError
from ..evaluation import (
    MetricReport,
    bleu_n,
    distinct_n,
    embedding_metrics,
    perplexity,
    policy_metrics,
    rank_metrics,
)
from ..models import MODEL_REGISTRY, ModelConfig, RankOutput, SideData, build_model
from ..models.decoding import beam_decode, greedy_decode
from .checkpoint import ModelArtifact
from .schedule import STOP, EarlyStopper, lr_schedule

log = logging.getLogger(__name__)

TASK_ORDER = ("rec", "conv", "policy")


@dataclass
class TrainState:
    epoch: int = 0
    global_step: int = 0
    best_metric: float = math.nan
    best_epoch: int = 0
    patience_counter: int = 0
    history: list[dict] = field(default_factory=list)


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def label_sequences(dialogs) -> list[list[int]]:
    sequences = []
    for dialog in dialogs:
        seq = [u.policy_label[1] for u in dialog.utterances if u.policy_label]
        if seq:
            sequences.append(seq)
    return sequences


class System:
    """Junction of corpus, dataloaders, models and evaluators."""

    def __init__(self, config_tree: dict, bundle: DatasetBundle):
        self.config = config_tree
        self.bundle = bundle
        task_section = cfg.get(config_tree, "task")
        if not task_section:
            raise ConfigError("no sub-task configured under 'task'")
        for task in task_section:
            if task not in TASK_ORDER:
                raise ConfigError(f"unknown sub-task '{task}' (expected rec/conv/policy)")
        self.tasks = [t for t in TASK_ORDER if t in task_section]

        side = SideData(
            entity_triples=bundle.entity_kg.triples,
            item2entity=bundle.item2entity,
        )
        self.task_models: dict[str, object] = {}
        self.models: dict[str, object] = {}
        for task in self.tasks:
            name = cfg.get(config_tree, f"task.{task}.model")
            if name not in MODEL_REGISTRY:
                raise ConfigError(
                    f"unknown model '{name}' for task {task}; "
                    f"registry: {sorted(MODEL_REGISTRY)}"
                )
            if task not in MODEL_REGISTRY[name].TASKS:
                raise ConfigError(f"model '{name}' does not support task '{task}'")
            if name not in self.models:
                self.models[name] = build_model(self._model_config(name, task), side)
            self.task_models[task] = self.models[name]

        self._entity2item = {e: i for i, e in bundle.item2entity.items()}

    # ------------------------------------------------------------------ build

    def _model_config(self, name: str, task: str) -> ModelConfig:
        tree = self.config
        overrides = {
            k: v for k, v in cfg.get(tree, f"task.{task}", {}).items() if k != "model"
        }
        model_cfg = {**cfg.get(tree, "model"), **overrides}
        max_seq = cfg.get(tree, "data.max_seq_len")
        max_gen = model_cfg.get("max_gen_len", 30)
        return ModelConfig(
            name=name,
            vocab_size=self.bundle.vocab.model_vocab_size,
            catalog_size=max(self.bundle.n_items, 1),
            label_count=len(self.bundle.policy_labels),
            n_entities=self.bundle.entity_kg.n_nodes,
            n_relations=self.bundle.entity_kg.n_relations,
            embedding_dim=model_cfg.get("embedding_dim", 32),
            hidden_dim=model_cfg.get("hidden_dim", 32),
            num_layers=model_cfg.get("num_layers", 1),
            num_heads=model_cfg.get("num_heads", 2),
            dropout=model_cfg.get("dropout", 0.0),
            max_gen_len=max_gen,
            max_positions=max(max_seq, max_gen + 2) + 2,
            sep_id=self.bundle.vocab.sep_id,
            seed=cfg.get(tree, "train.seed"),
        )

    def _instances(self, split: str, task: str):
        return make_instances(
            self.bundle.splits[split],
            task,
            max_context_turns=cfg.get(self.config, "data.max_context_turns"),
            vocab=self.bundle.vocab,
            rec_from_seeker=cfg.get(self.config, "data.rec_from_seeker"),
            item_seq_source=cfg.get(self.config, "data.item_seq_source"),
        )

    def state_dict(self) -> dict[str, torch.Tensor]:
        merged = {}
        for key, model in self.models.items():
            for pname, tensor in model.state_dict().items():
                merged[f"{key}.{pname}"] = tensor
        return merged

    def load_state(self, state: dict[str, torch.Tensor]) -> None:
        for key, model in self.models.items():
            prefix = f"{key}."
            own = {n[len(prefix):]: t for n, t in state.items() if n.startswith(prefix)}
            model.load_state_dict(own, strict=True)

    # -------------------------------------------------------------------- fit

    def fit(self) -> tuple[ModelArtifact, TrainState]:
        tree = self.config
        seed = cfg.get(tree, "train.seed")
        seed_everything(seed)

        epochs = cfg.get(tree, "train.epochs")
        batch_size = cfg.get(tree, "train.batch_size")
        base_lr = float(cfg.get(tree, "train.lr"))
        clip_norm = float(cfg.get(tree, "train.clip_norm"))
        warmup = cfg.get(tree, "train.schedule.warmup_steps")
        decay = float(cfg.get(tree, "train.schedule.decay"))
        monitor = cfg.get(tree, "train.monitor")
        max_seq = cfg.get(tree, "data.max_seq_len")

        train_instances = {t: self._instances("train", t) for t in self.tasks}
        valid_instances = {t: self._instances("valid", t) for t in self.tasks}

        for task, model in self.task_models.items():
            if hasattr(model, "fit_sequences"):
                model.fit_sequences(label_sequences(self.bundle.splits["train"]))
            elif not model.trainable:
                model.fit_counts(train_instances[task])

        trainable_tasks = [t for t in self.tasks if self.task_models[t].trainable]
        params, seen = [], set()
        for model in self.models.values():
            for p in model.parameters():
                if p.requires_grad and id(p) not in seen:
                    seen.add(id(p))
                    params.append(p)
        optimizer = (
            torch.optim.AdamW(
                params, lr=base_lr,
                weight_decay=float(cfg.get(tree, "train.weight_decay")),
            )
            if params
            else None
        )

        stopper = EarlyStopper(
            mode=cfg.get(tree, "train.early_stop.mode"),
            patience=cfg.get(tree, "train.early_stop.patience"),
            margin=float(cfg.get(tree, "train.early_stop.margin")),
        )
        state = TrainState()
        best_snapshot = None

        for epoch in range(1, epochs + 1):
            state.epoch = epoch
            if optimizer is not None:
                state.global_step = self._train_epoch(
                    epoch, trainable_tasks, train_instances, optimizer,
                    base_lr, warmup, decay, clip_norm, batch_size, max_seq, seed,
                    state.global_step,
                )
            report = self._validation_losses(valid_instances, batch_size, max_seq)
            entry = {"epoch": epoch, **report}
            state.history.append(entry)
            log.info("epoch %d: %s", epoch,
                     " ".join(f"{k}={v:.6f}" for k, v in report.items()))

            if optimizer is None:
                continue  # nothing to select or stop on without gradients
            if monitor not in report:
                raise ConfigError(
                    f"monitored validation metric '{monitor}' missing from "
                    f"report keys {sorted(report)}"
                )
            decision = stopper.update(report[monitor])
            if stopper.best_epoch == epoch:
                best_snapshot = copy.deepcopy(self.state_dict())
            state.best_metric = stopper.best
            state.best_epoch = stopper.best_epoch
            state.patience_counter = stopper.counter
            if decision == STOP:
                log.info("early stop at epoch %d (best epoch %d)", epoch, stopper.best_epoch)
                break

        if best_snapshot is not None:
            self.load_state(best_snapshot)

        artifact = self.to_artifact()
        return artifact, state

    def _train_epoch(self, epoch, tasks, instances, optimizer, base_lr, warmup,
                     decay, clip_norm, batch_size, max_seq, seed, global_step) -> int:
        iterators = {
            task: iterate_batches(
                instances[task], batch_size, shuffle=True,
                seed=seed + epoch, max_len=max_seq,
            )
            for task in tasks
            if instances[task]
        }
        batch_index = {task: 0 for task in iterators}
        live = [t for t in TASK_ORDER if t in iterators]
        while live:
            for task in list(live):
                batch = next(iterators[task], None)
                if batch is None:
                    live.remove(task)
                    continue
                model = self.task_models[task]
                for group in optimizer.param_groups:
                    group["lr"] = lr_schedule(global_step, base_lr, warmup, decay)
                optimizer.zero_grad()
                loss = model.loss(batch)
                if not torch.isfinite(loss):
                    raise ModelError(
                        f"non-finite loss {loss.detach().item()} at epoch {epoch}, "
                        f"global step {global_step}, {task} batch {batch_index[task]}"
                    )
                loss.backward()
                torch.nn.utils.clip_grad_norm_(
                    [p for g in optimizer.param_groups for p in g["params"]], clip_norm
                )
                optimizer.step()
                global_step += 1
                batch_index[task] += 1
        return global_step

    def _validation_losses(self, valid_instances, batch_size, max_seq) -> dict[str, float]:
        total, count = 0.0, 0
        report: dict[str, float] = {}
        with torch.no_grad():
            for task in self.tasks:
                insts = valid_instances[task]
                if not insts:
                    continue
                model = self.task_models[task]
                task_sum, task_n = 0.0, 0
                for batch in iterate_batches(insts, batch_size, max_len=max_seq):
                    value = float(model.loss(batch))
                    task_sum += value * batch.size
                    task_n += batch.size
                report[f"{task}_loss"] = task_sum / task_n
                total += task_sum
                count += task_n
        if count:
            report["loss"] = total / count
        return report

    # --------------------------------------------------------------- artifact

    def to_artifact(self) -> ModelArtifact:
        params = {
            name: tensor.detach().cpu().numpy().astype(np.float32)
            for name, tensor in self.state_dict().items()
        }
        return ModelArtifact(
            model_configs={key: asdict(m.config) for key, m in self.models.items()},
            params=params,
            corpus_fingerprint=self.bundle.fingerprint,
            metrics={},
            config_tree=copy.deepcopy(self.config),
            meta={
                "task_models": {
                    t: self.task_models[t].NAME for t in self.tasks
                },
                "dataset": cfg.get(self.config, "dataset.name"),
            },
        )

    @classmethod
    def from_artifact(cls, artifact: ModelArtifact, bundle: DatasetBundle) -> "System":
        system = cls(artifact.config_tree, bundle)
        state = {
            name: torch.as_tensor(array) for name, array in artifact.params.items()
        }
        system.load_state(state)
        return system

    # ------------------------------------------------------------------- eval

    def evaluate(self, split: str) -> list[MetricReport]:
        if split not in self.bundle.splits:
            raise ConfigError(f"unknown split '{split}'")
        batch_size = cfg.get(self.config, "train.batch_size")
        max_seq = cfg.get(self.config, "data.max_seq_len")
        reports = []
        for task in self.tasks:
            insts = self._instances(split, task)
            if not insts:
                continue
            model = self.task_models[task]
            if task == "rec":
                reports.append(self._eval_rec(model, insts, split, batch_size, max_seq))
            elif task == "conv":
                reports.append(self._eval_conv(model, insts, split, batch_size, max_seq))
            else:
                reports.append(self._eval_policy(model, insts, split, batch_size, max_seq))
        return reports

    def _eval_rec(self, model, insts, split, batch_size, max_seq) -> MetricReport:
        ks = tuple(cfg.get(self.config, "eval.ks_rec"))
        rankings, truths = [], []
        for batch in iterate_batches(insts, batch_size, max_len=max_seq):
            scores = model.rank(batch)
            for i in range(batch.size):
                rankings.append(RankOutput.from_scores(scores[i]).ranking)
                truths.append(int(batch.targets["target_item"][i]))
        metrics = rank_metrics(rankings, truths, ks)
        return MetricReport("rec", split, metrics, len(insts), {"model": model.NAME})

    def _eval_conv(self, model, insts, split, batch_size, max_seq) -> MetricReport:
        vocab = self.bundle.vocab
        nlls: list[float] = []
        for batch in iterate_batches(insts, batch_size, max_len=max_seq):
            nlls.extend(model.token_nlls(batch))
        metrics = {"perplexity": perplexity(nlls)}

        beam = cfg.get(self.config, "eval.beam_size")
        max_gen = cfg.get(self.config, "model.max_gen_len")
        hyps, refs = [], []
        for inst in insts:
            ctx = inst.context_token_ids[-max_seq:]
            handle = self._decoder_for(model, ctx, inst.context_entity_ids)
            if beam > 1:
                gen = beam_decode(handle, beam, vocab.start, vocab.end, vocab.pad, max_gen)
            else:
                gen = greedy_decode(handle, vocab.start, vocab.end, vocab.pad, max_gen)
            hyps.append(vocab.decode(gen.token_ids))
            refs.append(vocab.decode(inst.response_token_ids))
        for n in (1, 2, 3, 4):
            metrics[f"bleu@{n}"] = bleu_n(hyps, refs, n)
            try:
                metrics[f"distinct@{n}"] = distinct_n(hyps, n)
            except Exception:
                metrics[f"distinct@{n}"] = 0.0  # no n-grams generated at this order
        if self.bundle.word_vectors:
            try:
                emb = embedding_metrics(hyps, refs, self.bundle.word_vectors)
                metrics.update({f"embedding_{k}": v for k, v in emb.items()})
            except Exception:
                pass  # no embedding coverage on this split
        return MetricReport("conv", split, metrics, len(insts), {"model": model.NAME})

    def _eval_policy(self, model, insts, split, batch_size, max_seq) -> MetricReport:
        ks = tuple(cfg.get(self.config, "eval.ks_policy"))
        dists, truths = [], []
        for batch in iterate_batches(insts, batch_size, max_len=max_seq):
            probs = model.policy_probs(batch)
            for i in range(batch.size):
                dists.append(probs[i])
                truths.append(int(batch.targets["target_label"][i]))
        metrics = policy_metrics(dists, truths, ks)
        return MetricReport("policy", split, metrics, len(insts), {"model": model.NAME})

    def _decoder_for(self, model, ctx_ids, entity_ids):
        if hasattr(model, "user_rep_from_entities"):  # KG-grounded decoder
            return model.make_decoder(list(ctx_ids), entity_ids=list(entity_ids))
        return model.make_decoder(list(ctx_ids))

    # --------------------------------------------------------------- interact

    def interact_step(
        self,
        history: list[dict],
        user_text: str,
        profile: dict | None = None,
        rec_override: list[int] | None = None,
        policy_override: int | None = None,
    ) -> dict:
        """One human-machine turn: policy, then recommendation, then response.

        `history` rows are {"role", "text", "policy_label" (optional id)}.
        Overrides replace a component's output before downstream components
        run, mirroring the service's correction endpoint.
        """
        vocab = self.bundle.vocab
        tree = self.config
        max_turns = cfg.get(tree, "data.max_context_turns")
        max_seq = cfg.get(tree, "data.max_seq_len")
        top_k = cfg.get(tree, "serve.top_k")
        profile = profile or {}

        turns = []
        for row in history + [{"role": "seeker", "text": user_text}]:
            tokens = tokenize(row["text"], self.bundle.tokenizer)
            entity_ids = link_entities(tokens, self.bundle.surface_map)
            turns.append(
                {
                    "token_ids": vocab.encode(tokens),
                    "entity_ids": entity_ids,
                    "item_ids": [self._entity2item[e] for e in entity_ids
                                 if e in self._entity2item],
                    "policy_label": row.get("policy_label"),
                }
            )
        window = turns[-max_turns:]
        ctx_tokens: list[int] = []
        for i, turn in enumerate(window):
            if i > 0:
                ctx_tokens.append(vocab.sep_id)
            ctx_tokens.extend(turn["token_ids"])
        ctx_tokens = ctx_tokens[-max_seq:]
        ctx_entities = [e for turn in window for e in turn["entity_ids"]]

        # Policy first: the selected action is part of the turn record even
        # though the shipped rec models do not condition on it.
        policy_out = None
        if "policy" in self.task_models:
            policy_out = self._interact_policy(ctx_tokens, window, profile, policy_override)

        recommendations = None
        if "rec" in self.task_models:
            recommendations = self._interact_rec(
                ctx_tokens, ctx_entities, window, profile, top_k, rec_override
            )

        response, response_ids = None, []
        if "conv" in self.task_models:
            response, response_ids = self._interact_conv(
                ctx_tokens, ctx_entities, recommendations
            )

        return {
            "policy": policy_out,
            "recommendations": recommendations,
            "response": response,
            "response_token_ids": response_ids,
        }

    def _interact_policy(self, ctx_tokens, window, profile, policy_override):
        vocab = self.bundle.vocab
        labels = self.bundle.policy_labels
        profile_ids: list[int] = []
        for s, sentence in enumerate(profile.get("sentences", [])):
            if s > 0:
                profile_ids.append(vocab.sep_id)
            profile_ids.extend(vocab.encode(tokenize(sentence, "whitespace")))
        inst = PolicyInstance(
            context_token_ids=list(ctx_tokens),
            profile_token_ids=profile_ids,
            context_label_ids=[t["policy_label"] for t in window
                               if t.get("policy_label") is not None],
            target_label=0,
        )
        model = self.task_models["policy"]
        probs = model.policy_probs(pad_batch([inst]))[0]
        order = np.lexsort((np.arange(len(probs)), -probs))
        label_id = int(order[0]) if policy_override is None else int(policy_override)
        return {
            "label_id": label_id,
            "label": labels[label_id] if 0 <= label_id < len(labels) else str(label_id),
            "top": [
                {"label_id": int(i), "label": labels[int(i)], "prob": float(probs[int(i)])}
                for i in order[:5]
            ],
            "overridden": policy_override is not None,
        }

    def _interact_rec(self, ctx_tokens, ctx_entities, window, profile, top_k, rec_override):
        source = cfg.get(self.config, "data.item_seq_source")
        if source == "profile":
            item_seq = list(profile.get("items", []))
        else:
            item_seq = [i for t in window for i in t["item_ids"]]
        inst = RecInstance(
            context_token_ids=list(ctx_tokens),
            context_entity_ids=list(ctx_entities),
            context_item_ids=item_seq,
            target_item=0,
        )
        model = self.task_models["rec"]
        scores = model.rank(pad_batch([inst]))[0]
        ranked = RankOutput.from_scores(scores)
        if rec_override is not None:
            items = list(rec_override)
        else:
            items = ranked.ranking[:top_k]
        catalog = self.bundle.item_catalog
        return [
            {
                "item_id": int(item),
                "name": catalog[int(item)],
                "score": float(ranked.scores[int(item)]),
            }
            for item in items
        ]

    def _interact_conv(self, ctx_tokens, ctx_entities, recommendations):
        vocab = self.bundle.vocab
        model = self.task_models["conv"]
        max_gen = cfg.get(self.config, "model.max_gen_len")
        beam = cfg.get(self.config, "eval.beam_size")
        entity_ids = list(ctx_entities)
        if recommendations and hasattr(model, "user_rep_from_entities"):
            bias_top_m = cfg.get(self.config, "serve.bias_top_m")
            for rec in recommendations[:bias_top_m]:
                entity = self.bundle.item2entity.get(rec["item_id"])
                if entity is not None:
                    entity_ids.append(entity)
        handle = self._decoder_for(model, ctx_tokens, entity_ids)
        if beam > 1:
            gen = beam_decode(handle, beam, vocab.start, vocab.end, vocab.pad,
                              max_gen, min_len=1)
        else:
            gen = greedy_decode(handle, vocab.start, vocab.end, vocab.pad,
                                max_gen, min_len=1)
        words = vocab.decode(gen.token_ids)
        return " ".join(words), gen.token_ids
