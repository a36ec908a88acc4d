"""Validación de la configuración de una ejecución.

Los valores combinados (defaults, entorno, fichero JSON y opciones) se
pasan como ``MultiDict`` de cadenas a :class:`RunConfigForm`, igual que si
llegaran de un formulario; el resultado validado es un :class:`RunConfig`
inmutable.
"""

from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from pathlib import Path

from wtforms import BooleanField, Form, IntegerField, StringField
from wtforms.validators import InputRequired, NumberRange, Optional, ValidationError

from .services.circle_map import Arc
from .services.errors import ArithmeticDomainError
from .services.exact_arith import format_rational, parse_rational

_MAX_SEED = 2**64 - 1
_FALSE_VALUES = ("false", "False", "0", "no", "")


class RationalField(StringField):
    """Racional exacto escrito como ``"num/den"`` o entero."""

    def process_formdata(self, valuelist):
        if not valuelist or valuelist[0] in ("", None):
            return
        try:
            self.data = parse_rational(valuelist[0])
        except ArithmeticDomainError as exc:
            self.data = None
            raise ValueError(str(exc)) from exc


class ArcField(StringField):
    """Arco ``"izquierda,derecha"`` con extremos racionales."""

    def process_formdata(self, valuelist):
        if not valuelist or valuelist[0] in ("", None):
            return
        parts = str(valuelist[0]).split(",")
        if len(parts) != 2:
            self.data = None
            raise ValueError("se esperaba 'izquierda,derecha'")
        try:
            arc = Arc(parse_rational(parts[0]), parse_rational(parts[1]))
        except ArithmeticDomainError as exc:
            self.data = None
            raise ValueError(str(exc)) from exc
        if arc.length == 0:
            self.data = None
            raise ValueError("arco degenerado")
        self.data = arc


class IntListField(StringField):
    def process_formdata(self, valuelist):
        if not valuelist or valuelist[0] in ("", None):
            return
        try:
            values = tuple(int(part) for part in str(valuelist[0]).split(","))
        except ValueError:
            self.data = None
            raise ValueError("se esperaba una lista de enteros separados por comas") from None
        if not values or min(values) < 1:
            self.data = None
            raise ValueError("todos los valores deben ser ≥ 1")
        self.data = values


class WordField(StringField):
    """Palabra en los generadores separada por espacios; ``e`` o vacío es la identidad."""

    def process_formdata(self, valuelist):
        if not valuelist or valuelist[0] is None:
            return
        letters = tuple(str(valuelist[0]).split())
        self.data = () if letters in ((), ("e",)) else letters


def _existing_file(form, field):
    if field.data and not Path(field.data).is_file():
        raise ValidationError("el fichero no existe")


def _open_unit(form, field):
    if field.data is not None and not 0 < field.data < 1:
        raise ValidationError("debe estar en (0, 1)")


class RunConfigForm(Form):
    generators = StringField(validators=[Optional(), _existing_file])
    measure = StringField(validators=[Optional(), _existing_file])
    seed = IntegerField(validators=[InputRequired(), NumberRange(min=0, max=_MAX_SEED)])
    trials = IntegerField(validators=[InputRequired(), NumberRange(min=0)])
    horizon = IntegerField(validators=[InputRequired(), NumberRange(min=0)])
    workers = IntegerField(validators=[InputRequired(), NumberRange(min=1, max=256)])
    out = StringField(validators=[InputRequired()])
    checkpoint_interval = IntegerField(validators=[InputRequired(), NumberRange(min=1)])
    grid = IntegerField(default=64, validators=[Optional(), NumberRange(min=8)])
    delta = RationalField(default=Fraction(1, 10), validators=[Optional(), _open_unit])
    threshold = RationalField(default=Fraction(1, 32), validators=[Optional(), _open_unit])
    bins = IntegerField(default=32, validators=[Optional(), NumberRange(min=2)])
    n = IntegerField(default=60, validators=[Optional(), NumberRange(min=1)])
    n_max = IntegerField(default=60, validators=[Optional(), NumberRange(min=1)])
    n_list = IntListField(default=(30, 60))
    sparsity = IntegerField(default=1, validators=[Optional(), NumberRange(min=1)])
    s_max = IntegerField(default=8, validators=[Optional(), NumberRange(min=1)])
    j_max = IntegerField(default=20, validators=[Optional(), NumberRange(min=1)])
    collection_cap = IntegerField(default=10, validators=[Optional(), NumberRange(min=0, max=16)])
    support_cap = IntegerField(default=2_000_000, validators=[Optional(), NumberRange(min=1)])
    x = RationalField(default=Fraction(0))
    y = RationalField(default=Fraction(1, 2))
    arc = ArcField(default=None)
    source_arc = ArcField(default=None)
    a_word = WordField(default=("A_inv", "B", "A"))
    g_word = WordField(default=())
    k = RationalField(default=None)
    fit_start = IntegerField(default=10, validators=[Optional(), NumberRange(min=0)])
    max_steps = IntegerField(default=200, validators=[Optional(), NumberRange(min=1)])
    words = IntegerField(default=1000, validators=[Optional(), NumberRange(min=0)])
    max_length = IntegerField(default=12, validators=[Optional(), NumberRange(min=1)])
    random_checks = IntegerField(default=5, validators=[Optional(), NumberRange(min=0)])
    settle_by = IntegerField(default=200, validators=[Optional(), NumberRange(min=0)])
    xi_horizon = IntegerField(default=None, validators=[Optional(), NumberRange(min=1)])
    pushforward = BooleanField(default=False, false_values=_FALSE_VALUES)
    verify_final = BooleanField(default=False, false_values=_FALSE_VALUES)
    install = BooleanField(default=False, false_values=_FALSE_VALUES)

    def to_config(self) -> "RunConfig":
        return RunConfig(**{f.name: getattr(self, f.name).data for f in fields(RunConfig)})


@dataclass(frozen=True)
class RunConfig:
    generators: str | None
    measure: str | None
    seed: int
    trials: int
    horizon: int
    workers: int
    out: str
    checkpoint_interval: int
    grid: int
    delta: Fraction
    threshold: Fraction
    bins: int
    n: int
    n_max: int
    n_list: tuple[int, ...]
    sparsity: int
    s_max: int
    j_max: int
    collection_cap: int
    support_cap: int
    x: Fraction
    y: Fraction
    arc: Arc | None
    source_arc: Arc | None
    a_word: tuple[str, ...]
    g_word: tuple[str, ...]
    k: Fraction | None
    fit_start: int
    max_steps: int
    words: int
    max_length: int
    random_checks: int
    settle_by: int
    xi_horizon: int | None
    pushforward: bool
    verify_final: bool
    install: bool

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def to_json(self) -> dict:
        """Eco de la configuración para el manifiesto (reproducible sin otro estado)."""

        payload = {}
        for key, value in asdict(self).items():
            if isinstance(value, Fraction):
                value = format_rational(value)
            elif isinstance(value, dict) and set(value) == {"left", "right"}:
                value = f"{format_rational(value['left'])},{format_rational(value['right'])}"
            elif isinstance(value, tuple):
                value = " ".join(value) if key.endswith("_word") else ",".join(str(v) for v in value)
            payload[key] = value
        return payload
