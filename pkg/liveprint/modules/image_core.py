"""
Модуль Image Core - полутоновое изображение, ввод/вывод PGM и разбиение на блоки
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Tuple, Union

import numpy as np

from liveprint.config import Config
from liveprint.errors import ImageTooSmall, MalformedHeader, TruncatedData, UnsupportedDepth

PGM_MAGIC = b"P5"


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-битное полутоновое изображение (0 - чёрный/гребень, 255 - белый)"""
    width: int
    height: int
    pixels: np.ndarray  # uint8, форма (height, width)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        pixels = np.asarray(self.pixels)
        if pixels.size != self.width * self.height:
            raise ValueError(
                f"pixel count {pixels.size} does not match {self.width}x{self.height}"
            )
        if pixels.dtype != np.uint8:
            if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
                raise ValueError("gray values must lie in [0, 255]")
            pixels = pixels.astype(np.uint8)
        pixels = np.ascontiguousarray(pixels.reshape(self.height, self.width))
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def from_array(cls, array) -> "GrayImage":
        """Изображение из двумерного массива (значения округляются и обрезаются до 0..255)"""
        array = np.asarray(array)
        if array.ndim != 2:
            raise ValueError("expected a 2-D array")
        if array.dtype != np.uint8:
            array = np.clip(np.rint(array), 0, 255).astype(np.uint8)
        return cls(width=array.shape[1], height=array.shape[0], pixels=array)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def to_unit(self) -> np.ndarray:
        """Серый уровень, нормированный в [0, 1]"""
        return self.pixels.astype(np.float64) / 255.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.pixels, other.pixels)

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.pixels.tobytes()))


@dataclass(frozen=True)
class BlockGrid:
    """Неперекрывающиеся блоки; неполные полосы у краёв отбрасываются"""
    block_size: int
    nx: int
    ny: int
    width: int
    height: int

    @property
    def n_blocks(self) -> int:
        return self.nx * self.ny

    @property
    def covered_shape(self) -> Tuple[int, int]:
        return self.ny * self.block_size, self.nx * self.block_size

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        for by in range(self.ny):
            for bx in range(self.nx):
                yield bx, by

    def contains(self, bx: int, by: int) -> bool:
        return 0 <= bx < self.nx and 0 <= by < self.ny

    def rect(self, bx: int, by: int) -> Tuple[int, int, int, int]:
        """Прямоугольник блока (x0, y0, x1, y1), правые границы не включаются"""
        if not self.contains(bx, by):
            raise IndexError(f"block ({bx}, {by}) outside {self.nx}x{self.ny} grid")
        bs = self.block_size
        return bx * bs, by * bs, (bx + 1) * bs, (by + 1) * bs

    def center(self, bx: int, by: int) -> Tuple[float, float]:
        """Центр блока в пиксельных координатах (центры пикселей - целые числа)"""
        x0, y0, _, _ = self.rect(bx, by)
        half = (self.block_size - 1) / 2.0
        return x0 + half, y0 + half

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Координаты центров всех блоков, массивы формы (ny, nx)"""
        half = (self.block_size - 1) / 2.0
        cx = np.arange(self.nx) * self.block_size + half
        cy = np.arange(self.ny) * self.block_size + half
        return np.meshgrid(cx, cy)

    def blocks_view(self, array: np.ndarray) -> np.ndarray:
        """Представление попиксельного массива в виде (ny, nx, bs, bs)"""
        bs = self.block_size
        h, w = self.covered_shape
        return array[:h, :w].reshape(self.ny, bs, self.nx, bs).swapaxes(1, 2)

    def block_sums(self, array: np.ndarray) -> np.ndarray:
        return self.blocks_view(array).sum(axis=(2, 3))

    def block_means(self, array: np.ndarray) -> np.ndarray:
        return self.blocks_view(array).mean(axis=(2, 3))

    def expand(self, per_block: np.ndarray, fill=0) -> np.ndarray:
        """Поблочные значения -> попиксельный массив размера изображения"""
        bs = self.block_size
        per_block = np.asarray(per_block)
        out = np.full((self.height, self.width), fill, dtype=per_block.dtype)
        h, w = self.covered_shape
        out[:h, :w] = np.kron(per_block, np.ones((bs, bs), dtype=per_block.dtype))
        return out


def block_partition(img: GrayImage, block_size: int = Config.DEFAULT_BLOCK_SIZE) -> BlockGrid:
    """
    Разбиение изображения на неперекрывающиеся блоки

    Args:
        img: изображение
        block_size: сторона блока в пикселях (>= 4)
    """
    if block_size < Config.MIN_BLOCK_SIZE:
        raise ValueError(f"block_size must be >= {Config.MIN_BLOCK_SIZE}, got {block_size}")
    if img.width < block_size or img.height < block_size:
        raise ImageTooSmall(
            f"image {img.width}x{img.height} is smaller than block size {block_size}"
        )
    return BlockGrid(
        block_size=block_size,
        nx=img.width // block_size,
        ny=img.height // block_size,
        width=img.width,
        height=img.height,
    )


def _next_token(data: bytes, pos: int) -> Tuple[bytes, int]:
    """Следующий токен заголовка PGM с пропуском пробелов и комментариев"""
    n = len(data)
    while pos < n:
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def _header_int(token: bytes, what: str) -> int:
    if not token or not token.isdigit():
        raise MalformedHeader(f"bad {what} in PGM header: {token!r}")
    return int(token)


def load_pgm(data: bytes) -> GrayImage:
    """
    Декодирование двоичного PGM (P5)

    Args:
        data: содержимое файла
    """
    if data[:2] != PGM_MAGIC:
        raise MalformedHeader(f"bad PGM magic {data[:2]!r}")
    pos = 2
    if pos < len(data) and not (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
        raise MalformedHeader("PGM magic must be followed by whitespace")

    token, pos = _next_token(data, pos)
    width = _header_int(token, "width")
    token, pos = _next_token(data, pos)
    height = _header_int(token, "height")
    token, pos = _next_token(data, pos)
    maxval = _header_int(token, "maxval")

    if width == 0 or height == 0:
        raise MalformedHeader(f"zero image dimension {width}x{height}")
    if maxval == 0:
        raise MalformedHeader("maxval must be positive")
    if maxval > 255:
        raise UnsupportedDepth(f"maxval {maxval} exceeds 255")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise MalformedHeader("missing whitespace after maxval")
    pos += 1

    count = width * height
    raster = data[pos:pos + count]
    if len(raster) < count:
        raise TruncatedData(f"expected {count} pixel bytes, got {len(raster)}")

    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    if maxval < 255:
        # Приведение к шкале 0..255 с округлением половины вверх
        values = np.minimum(pixels.astype(np.int64), maxval)
        pixels = ((values * 255 + maxval // 2) // maxval).astype(np.uint8)
    return GrayImage(width=width, height=height, pixels=pixels)


def save_pgm(img: GrayImage) -> bytes:
    """Каноническое кодирование: "P5\\n<w> <h>\\n255\\n" + байты пикселей"""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def read_pgm(path: Union[str, Path]) -> GrayImage:
    return load_pgm(Path(path).read_bytes())


def write_pgm(path: Union[str, Path], img: GrayImage) -> None:
    Path(path).write_bytes(save_pgm(img))
