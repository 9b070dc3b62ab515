"""HTTP service for the human scene-recognition study.

Each session gets a seeded shuffle of the stimulus images, one randomly
chosen quantization condition per image.  Trial responses never reveal the
condition or the true class; stimuli are addressed through opaque media
ids minted per session.  Answers are appended to a newline-delimited JSON
log (fsynced before the acknowledgment), and every aggregate is a pure
fold over that log, so a crash loses nothing that was acknowledged.

Run with ``python -m bovw.study --stimuli DIR --log FILE [--static DIR]``;
the stimulus directory is what ``bovw export-study`` produces.
"""

import argparse
import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field

import numpy as np

CONDITIONS = ("original", "noquant", "k32", "k128", "k512", "k2048")
STUDY_K_VALUES = (32, 128, 512, 2048)


class UnknownSessionError(KeyError):
    pass


class InvalidAnswerError(ValueError):
    pass


class DuplicateAnswerError(Exception):
    pass


class NoStimuliError(Exception):
    pass


@dataclass(frozen=True)
class Stimulus:
    image_id: str
    true_class: str
    files: dict  # condition -> absolute path


@dataclass
class _Trial:
    trial_id: int
    stimulus: Stimulus
    condition: str
    media_id: str


@dataclass
class _Session:
    trials: list
    answered: int = 0


def load_stimuli(stimulus_dir):
    """Read manifest.jsonl into Stimulus objects keyed by image id."""
    manifest = os.path.join(stimulus_dir, "manifest.jsonl")
    if not os.path.exists(manifest):
        raise FileNotFoundError(f"no stimulus manifest at {manifest}")
    grouped = {}
    classes = {}
    with open(manifest, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            if row["condition"] not in CONDITIONS:
                raise ValueError(f"manifest condition {row['condition']!r} not one of {CONDITIONS}")
            path = os.path.join(stimulus_dir, row["file"])
            grouped.setdefault(row["image_id"], {})[row["condition"]] = path
            classes[row["image_id"]] = row["true_class"]
    return {
        image_id: Stimulus(image_id=image_id, true_class=classes[image_id], files=files)
        for image_id, files in grouped.items()
    }


def load_examples(stimulus_dir):
    """Read examples.jsonl: class name -> list of absolute file paths."""
    path = os.path.join(stimulus_dir, "examples.jsonl")
    examples = {}
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    examples.setdefault(row["class"], []).append(
                        os.path.join(stimulus_dir, row["file"])
                    )
    return examples


def read_log(log_path):
    """All answer records currently on disk, oldest first."""
    records = []
    if os.path.exists(log_path):
        with open(log_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
    return records


def aggregate_records(records):
    """Per-condition average recognition rate (mean of per-class accuracy).

    Conditions without trials are absent from the output.
    """
    by_condition = {}
    for rec in records:
        cls_stats = by_condition.setdefault(rec["condition"], {})
        correct, total = cls_stats.get(rec["true_class"], (0, 0))
        cls_stats[rec["true_class"]] = (
            correct + (rec["answered_class"] == rec["true_class"]),
            total + 1,
        )
    conditions = {}
    for cond in CONDITIONS:
        if cond not in by_condition:
            continue
        stats = by_condition[cond]
        rates = [c / t for c, t in stats.values()]
        conditions[cond] = {
            "trials": int(sum(t for _, t in stats.values())),
            "rate": float(np.mean(rates)),
        }
    return {"total": len(records), "conditions": conditions}


def aggregate_results(log_path):
    """Pure fold of the on-disk answer log into per-condition rates."""
    return aggregate_records(read_log(log_path))


class StudyService:
    """All study state and rules, independent of the HTTP layer."""

    def __init__(self, stimulus_dir, log_path):
        self.stimuli = load_stimuli(stimulus_dir)
        self.examples = load_examples(stimulus_dir)
        self.classes = tuple(sorted({s.true_class for s in self.stimuli.values()}))
        self.log_path = log_path
        self._lock = threading.Lock()
        self._sessions = {}
        self._media = {}
        self._answered = {(r["session_id"], r["trial_id"]) for r in read_log(log_path)}
        for cls, paths in self.examples.items():
            for i, path in enumerate(paths):
                self._media[f"example-{cls}-{i}"] = path

    def create_session(self, seed=None):
        with self._lock:
            if not self.stimuli:
                raise NoStimuliError("no stimuli loaded")
            token = secrets.token_hex(16)
            rng = np.random.default_rng(seed if seed is not None else secrets.randbits(64))
            order = rng.permutation(sorted(self.stimuli))
            trials = []
            for i, image_id in enumerate(order, start=1):
                stim = self.stimuli[image_id]
                available = [c for c in CONDITIONS if c in stim.files]
                condition = available[rng.integers(len(available))]
                media_id = secrets.token_hex(12)
                self._media[media_id] = stim.files[condition]
                trials.append(_Trial(i, stim, condition, media_id))
            self._sessions[token] = _Session(trials=trials)
            return {
                "session": token,
                "classes": list(self.classes),
                "examples": {
                    cls: [f"/media/example-{cls}-{i}" for i in range(len(paths))]
                    for cls, paths in self.examples.items()
                },
                "trials_total": len(trials),
            }

    def _session(self, token):
        try:
            return self._sessions[token]
        except KeyError:
            raise UnknownSessionError(f"unknown session {token!r}") from None

    def next_trial(self, token):
        """The current outstanding trial; idempotent until it is answered."""
        with self._lock:
            sess = self._session(token)
            if sess.answered >= len(sess.trials):
                return {"complete": True, "answered": sess.answered}
            trial = sess.trials[sess.answered]
            return {
                "complete": False,
                "trial_id": trial.trial_id,
                "stimulus": f"/media/{trial.media_id}",
                "total": len(sess.trials),
            }

    def submit_answer(self, token, trial_id, answered_class):
        with self._lock:
            sess = self._session(token)
            if answered_class not in self.classes:
                raise InvalidAnswerError(f"unknown class {answered_class!r}")
            if (token, trial_id) in self._answered or trial_id <= sess.answered:
                raise DuplicateAnswerError(f"trial {trial_id} already answered")
            if trial_id != sess.answered + 1:
                raise DuplicateAnswerError(f"trial {trial_id} is not outstanding")
            trial = sess.trials[sess.answered]
            record = {
                "session_id": token,
                "trial_id": trial_id,
                "image_id": trial.stimulus.image_id,
                "condition": trial.condition,
                "true_class": trial.stimulus.true_class,
                "answered_class": answered_class,
                "timestamp": time.time(),
            }
            self._append(record)
            sess.answered += 1
            self._answered.add((token, trial_id))
            return {"ok": True, "trial_id": trial_id}

    def _append(self, record):
        line = json.dumps(record, sort_keys=True) + "\n"
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def media_path(self, media_id):
        with self._lock:
            return self._media.get(media_id)

    def results(self):
        return aggregate_results(self.log_path)


def create_app(stimulus_dir, log_path, static_dir=None):
    """FastAPI application wrapping a StudyService."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import FileResponse
    from fastapi.staticfiles import StaticFiles
    from pydantic import BaseModel, Field

    service = StudyService(stimulus_dir, log_path)
    app = FastAPI(title="scene study")
    app.state.service = service

    class SessionBody(BaseModel):
        seed: int | None = None

    class AnswerBody(BaseModel):
        trial_id: int
        answered: str = Field(alias="class")
        model_config = {"populate_by_name": True}

    @app.post("/api/session")
    def create_session(body: SessionBody | None = None):
        try:
            return service.create_session(body.seed if body else None)
        except NoStimuliError as exc:
            raise HTTPException(status_code=503, detail=str(exc))

    @app.get("/api/session/{token}/trial")
    def next_trial(token: str):
        try:
            return service.next_trial(token)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/api/session/{token}/answer")
    def submit_answer(token: str, body: AnswerBody):
        try:
            return service.submit_answer(token, body.trial_id, body.answered)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except InvalidAnswerError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except DuplicateAnswerError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/api/results")
    def results():
        return service.results()

    @app.get("/media/{media_id}")
    def media(media_id: str):
        path = service.media_path(media_id)
        if path is None or not os.path.exists(path):
            raise HTTPException(status_code=404, detail="unknown stimulus")
        return FileResponse(path, media_type="image/png")

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def main(argv=None):
    parser = argparse.ArgumentParser(description="run the study service")
    parser.add_argument("--host", default=os.environ.get("STUDY_HOST", "127.0.0.1"))
    parser.add_argument("--port", type=int, default=int(os.environ.get("STUDY_PORT", "6780")))
    parser.add_argument("--stimuli", default=os.environ.get("STUDY_STIMULI"),
                        help="directory produced by 'bovw export-study'")
    parser.add_argument("--log", default=os.environ.get("STUDY_LOG", "study-answers.jsonl"))
    parser.add_argument("--static", default=os.environ.get("STUDY_STATIC"),
                        help="directory with the browser client bundle")
    args = parser.parse_args(argv)
    if not args.stimuli:
        parser.error("--stimuli (or STUDY_STIMULI) is required")

    import uvicorn

    uvicorn.run(create_app(args.stimuli, args.log, args.static),
                host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
