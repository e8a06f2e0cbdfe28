"""Interactive chat REPL over a trained checkpoint."""

import sys

from .corpus import DialogueSample, Role
from .evaluation import export_trace, force_listener, trace_sample

HELP = """commands:
  /reset          forget the dialogue context
  /force <emotion>  route the next responses through one listener
  /force off      back to the model's own gate
  /trace <path>   export the last emotion distribution to a file
  /quit           exit
"""


def run_chat(model, vocab, labels, max_len=30,
             input_stream=None, output_stream=None):
    """Alternating user/model REPL. The growing context keeps correct
    speaker/listener state ids; after each response the top-3 emotions from
    the gate distribution are printed."""
    inp = input_stream if input_stream is not None else sys.stdin
    out = output_stream if output_stream is not None else sys.stdout
    turns = []
    forced = None
    last_trace = None

    def emit(text):
        out.write(text + "\n")
        out.flush()

    emit("type a message, or /quit to exit")
    for raw in inp:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("/"):
            cmd, _, arg = line.partition(" ")
            if cmd == "/quit":
                break
            elif cmd == "/reset":
                turns = []
                forced = None
                emit("context cleared")
            elif cmd == "/force":
                arg = arg.strip()
                if arg in ("off", ""):
                    forced = None
                    emit("forcing disabled")
                elif arg in labels:
                    forced = labels.index(arg)
                    emit(f"forcing listener {arg!r}")
                else:
                    emit(f"unknown emotion {arg!r}; choose from: "
                         + ", ".join(labels))
            elif cmd == "/trace":
                if last_trace is None:
                    emit("nothing to trace yet")
                else:
                    export_trace(last_trace, arg.strip(), labels)
                    emit(f"trace written to {arg.strip()}")
            else:
                emit(HELP)
            continue

        turns.append((Role.SPEAKER, line))
        sample = DialogueSample(turns=list(turns), emotion=0, target="-")
        if forced is not None:
            tokens, trace = force_listener(model, sample, vocab, forced,
                                           max_len)
        else:
            trace = trace_sample(model, sample, vocab, max_len)
            tokens = trace.response.split()
        last_trace = trace
        response = " ".join(tokens) if tokens else "..."
        turns.append((Role.LISTENER, response))
        emit(f"bot: {response}")
        if trace.p:
            ranked = sorted(range(len(trace.p)),
                            key=lambda i: (-trace.p[i], i))[:3]
            emit("     " + "  ".join(f"{labels[i]}={trace.p[i]:.3f}"
                                     for i in ranked))
    emit("bye")
