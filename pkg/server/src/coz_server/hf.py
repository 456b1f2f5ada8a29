"""Model-backed engines behind guarded imports (install the [real] extra).

These load at server startup, never per request. They are deliberately thin:
the wire schemas and routing live in app.py, and any model exposing the same
call shape can replace these classes via configuration.
"""

from __future__ import annotations

import numpy as np


class RealEngineUnavailable(RuntimeError):
    """Raised at startup when a real engine's dependencies or weights fail."""


def _import_torch():
    try:
        import torch
    except ImportError as exc:
        raise RealEngineUnavailable(
            "real mode needs torch; install the [real] extra"
        ) from exc
    return torch


class HfVlmPrompt:
    """Vision-language model served for both prompt writing and critic scoring.

    The request's template_text is the full instruction (the client pins its
    templates byte-exactly), so the server never rewrites prompts; it only
    formats the chat turn and samples.
    """

    def __init__(self, model_path: str, device: str = "cpu"):
        torch = _import_torch()
        try:
            from transformers import AutoModelForVision2Seq, AutoProcessor
        except ImportError as exc:
            raise RealEngineUnavailable(
                "real prompt/critic roles need transformers; install the [real] extra"
            ) from exc
        try:
            self.processor = AutoProcessor.from_pretrained(model_path)
            self.model = AutoModelForVision2Seq.from_pretrained(
                model_path, torch_dtype="auto"
            ).to(device).eval()
        except Exception as exc:
            raise RealEngineUnavailable(f"cannot load VLM {model_path!r}: {exc}") from exc
        self.device = device
        self._torch = torch

    def generate(self, images, template_id, template_text, description,
                 temperature, max_tokens, seed):
        from PIL import Image

        torch = self._torch
        text = template_text or "what is in the image? Give me a set of words."
        if description:
            text = f"{text}\nDescription: {description}"
        content = [{"type": "image"} for _ in images] + [{"type": "text", "text": text}]
        chat = self.processor.apply_chat_template(
            [{"role": "user", "content": content}], add_generation_prompt=True
        )
        pil_images = [Image.fromarray(im) for im in images]
        inputs = self.processor(text=chat, images=pil_images, return_tensors="pt").to(
            self.device
        )
        torch.manual_seed(seed)
        with torch.no_grad():
            out = self.model.generate(
                **inputs,
                do_sample=temperature > 0,
                temperature=max(temperature, 1e-5),
                max_new_tokens=max_tokens,
            )
        trimmed = out[0][inputs["input_ids"].shape[1]:]
        return self.processor.decode(trimmed, skip_special_tokens=True).strip()


class DiffusionSR:
    """Image-to-image refinement of the pre-zoomed window, dimension-preserving."""

    def __init__(self, model_path: str, device: str = "cpu",
                 strength: float = 0.35, steps: int = 20):
        torch = _import_torch()
        try:
            from diffusers import AutoPipelineForImage2Image
        except ImportError as exc:
            raise RealEngineUnavailable(
                "real sr role needs diffusers; install the [real] extra"
            ) from exc
        try:
            self.pipe = AutoPipelineForImage2Image.from_pretrained(model_path).to(device)
        except Exception as exc:
            raise RealEngineUnavailable(f"cannot load SR pipeline {model_path!r}: {exc}") from exc
        self.device = device
        self.strength = strength
        self.steps = steps
        self._torch = torch

    def upscale(self, image, prompt, scale, seed):
        from PIL import Image

        torch = self._torch
        src = Image.fromarray(image)
        gen = torch.Generator(device=self.device).manual_seed(seed)
        out = self.pipe(
            prompt=prompt or "a sharp, detailed photograph",
            image=src,
            strength=self.strength,
            num_inference_steps=self.steps,
            generator=gen,
        ).images[0]
        if out.size != src.size:  # wire contract: same dims back
            out = out.resize(src.size, Image.BICUBIC)
        arr = np.asarray(out.convert("RGB"), dtype=np.uint8)
        return arr, {"engine": "diffusion-img2img", "steps": self.steps,
                     "strength": self.strength}


class IqaMetric:
    """Learned no-reference metrics via pyiqa, one lazily created per name."""

    def __init__(self, model_path: str = "", device: str = "cpu"):
        _import_torch()
        try:
            import pyiqa
        except ImportError as exc:
            raise RealEngineUnavailable(
                "real metric role needs pyiqa; pip install pyiqa"
            ) from exc
        self._pyiqa = pyiqa
        self.device = device
        self._models = {}

    def score(self, image, metric):
        name = metric.lower()
        if name not in self._models:
            try:
                self._models[name] = self._pyiqa.create_metric(name, device=self.device)
            except Exception as exc:
                raise ValueError(f"unknown metric {metric!r}: {exc}") from exc
        import torch

        tensor = torch.from_numpy(image.astype(np.float32) / 255.0)
        tensor = tensor.permute(2, 0, 1).unsqueeze(0).to(self.device)
        with torch.no_grad():
            return float(self._models[name](tensor).item())
