public class ArrayWalk {
    // variant build
    public static void main(String[] argv) {
        int[] slots = new int[8];
        for (int i = 0; i < slots.length; i++) {
            slots[i] = i * 3;
        }
        int tail = slots[7];
        System.out.println(tail);
    }
}
