from levelforge import sprites


def test_alphabet_size():
    assert len(sprites.ALL_SPRITES) == 32
    assert len(sprites.OBJECT_CLASSES) == 11
    assert len(sprites.WORD_SPRITES) == 21
    assert len(set(sprites.ALL_SPRITES)) == 32


def test_classification_partitions_non_empty_sprites():
    for sprite in sprites.ALL_SPRITES:
        kinds = [
            sprites.is_object(sprite),
            sprites.is_noun(sprite),
            sprite == sprites.IS_WORD,
            sprites.is_property(sprite),
        ]
        assert sum(kinds) == 1, sprite
        assert sprites.is_word(sprite) == (not sprites.is_object(sprite))


def test_char_codec_is_bijective():
    chars = set(sprites.SPRITE_TO_CHAR.values())
    assert len(chars) == 32
    assert sprites.EMPTY_CHAR not in chars
    for sprite, ch in sprites.SPRITE_TO_CHAR.items():
        assert sprites.CHAR_TO_SPRITE[ch] == sprite


def test_noun_class_pairing():
    assert sprites.NOUN_TO_CLASS["BABA"] == "baba"
    assert sprites.CLASS_TO_NOUN["floor"] == "FLOOR"
    assert set(sprites.NOUN_TO_CLASS.values()) == set(sprites.OBJECT_CLASSES)
